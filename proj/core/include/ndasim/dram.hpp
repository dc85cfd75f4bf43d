#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ndasim/types.hpp"

namespace ndasim {

/// DDR4 timing constraints in command-clock cycles. Defaults are the DDR4-2400
/// values used throughout the experiments.
struct TimingParams {
    int tBL = 4;
    int tCCDS = 4;
    int tCCDL = 6;
    int tRTRS = 2;
    int tCL = 16;
    int tRCD = 16;
    int tRP = 16;
    int tCWL = 12;
    int tRAS = 39;
    int tRC = 55;
    int tRTP = 9;
    int tWTRS = 3;
    int tWTRL = 9;
    int tWR = 18;
    int tRRDS = 4;
    int tRRDL = 6;
    int tFAW = 26;

    /// Throws ConfigError when a value is non-positive or tRC < tRAS + tRP.
    void validate() const;

    int read_to_write() const { return tCL + tBL + 2 - tCWL; }
    int write_to_read(bool same_group) const { return tCWL + tBL + (same_group ? tWTRL : tWTRS); }
    int write_recovery() const { return tCWL + tBL + tWR; }

    bool operator==(const TimingParams&) const = default;
};

/// Earliest-legal cycle for a command and the rule that binds it.
struct IssueBound {
    Cycle cycle = 0;
    const char* rule = "none";
};

struct BankState {
    static constexpr std::int32_t kClosed = -1;

    std::int32_t open_row = kClosed;
    Cycle next_act = 0;
    Cycle next_pre = 0;
    Cycle next_rd = 0;
    Cycle next_wr = 0;
    const char* act_rule = "none";
    const char* pre_rule = "none";
    const char* col_rule = "none";

    bool is_open() const { return open_row != kClosed; }
};

struct RankState {
    std::uint32_t id = 0;
    std::vector<BankState> banks;
    // Issue times of the last four ACTs, oldest first once full.
    std::array<Cycle, 4> act_window{kNever, kNever, kNever, kNever};
    std::uint32_t act_head = 0;
    std::vector<Cycle> last_act;  // per bank group
    std::vector<Cycle> last_rd;
    std::vector<Cycle> last_wr;
    Cycle last_cmd = kNever;

    Cycle oldest_act() const { return act_window[act_head]; }
    void record_act(Cycle c) {
        act_window[act_head] = c;
        act_head = (act_head + 1) % act_window.size();
    }
};

/// One channel's protocol state. Host commands share the channel C/A and data
/// bus; NDA commands are rank-internal and only constrain their own rank.
class ChannelState {
public:
    ChannelState() = default;
    ChannelState(std::uint32_t id, const Geometry& geo, const TimingParams& tp);

    std::uint32_t id() const { return id_; }
    const Geometry& geometry() const { return geo_; }
    const TimingParams& timing() const { return tp_; }
    const RankState& rank(std::uint32_t r) const { return ranks_[r]; }
    const BankState& bank(std::uint32_t r, std::uint32_t b) const { return ranks_[r].banks[b]; }

    /// Smallest legal issue cycle for cmd (cmd.issue_cycle is ignored). Pure.
    /// Throws IllegalCommand when the bank status forbids the command outright.
    Cycle earliest_issue(const DramCommand& cmd) const { return earliest_bound(cmd).cycle; }
    IssueBound earliest_bound(const DramCommand& cmd) const;

    /// Checks legality (IllegalCommand / TimingViolation) and applies cmd.
    void apply(const DramCommand& cmd);

    /// Non-throwing check used by schedulers on the hot path.
    bool can_issue(const DramCommand& cmd) const;

    Cycle host_bus_end() const { return bus_end_; }

    bool same_state(const ChannelState& other) const;

private:
    void check_structure(const DramCommand& cmd) const;

    std::uint32_t id_ = 0;
    Geometry geo_;
    TimingParams tp_;
    std::vector<RankState> ranks_;
    Cycle last_host_cmd_ = kNever;
    Cycle bus_end_ = kNever;       // end of the latest host data burst
    std::uint32_t bus_rank_ = 0;
};

/// Free-function forms matching the protocol operations.
Cycle earliest_issue(const ChannelState& channel, const DramCommand& cmd);
ChannelState apply_command(ChannelState channel, const DramCommand& cmd);

}  // namespace ndasim

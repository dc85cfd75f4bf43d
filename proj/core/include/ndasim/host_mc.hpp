#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ndasim/dram.hpp"
#include "ndasim/kvconfig.hpp"
#include "ndasim/mapping.hpp"

namespace ndasim {

enum class TxnKind : std::uint8_t { Read, Write };

struct Transaction {
    TxnKind kind = TxnKind::Read;
    PhysicalAddress paddr = 0;
    DramAddress addr;              // filled by the controller on enqueue when left default
    Cycle arrival_cycle = 0;
    Cycle completion_cycle = kNever;
    std::uint64_t id = 0;          // assigned on enqueue, monotonically increasing
    std::int64_t tag = -1;         // opaque owner tag (launch packets, runtime reads)
};

struct HostPolicy {
    std::uint32_t read_queue = 32;
    std::uint32_t write_queue = 32;
    std::uint32_t drain_high = 24;  // start draining writes at this occupancy
    std::uint32_t drain_low = 8;    // stop draining at this occupancy
    Cycle starvation_cap = 2048;
    /// Ranks whose oldest queued transaction has waited this long ask their
    /// NDA to pause so the host can get the turnaround gap it needs.
    Cycle nda_yield_age = 256;

    void validate() const;
    static HostPolicy from_config(const KeyValueConfig& kv);
};

/// FR-FCFS open-page controller for one channel.
class HostController {
public:
    HostController(std::uint32_t channel, const Geometry& geo, const TimingParams& tp, HostPolicy policy = {});

    std::uint32_t channel() const { return channel_; }
    const HostPolicy& policy() const { return policy_; }

    /// Appends to the matching queue; false (backpressure) when it is full.
    /// txn.addr must already be mapped to this channel.
    bool enqueue(Transaction txn, Cycle now);
    bool can_accept(TxnKind k) const;

    /// Picks at most one command that is legal against `table` at `now`.
    /// Does not mutate the table; call commit() with the result to retire it.
    std::optional<DramCommand> schedule(const ChannelState& table, Cycle now);
    /// Records that `cmd` (returned by schedule) issued. Column commands retire
    /// their transaction, which is appended to the completed list.
    void commit(const DramCommand& cmd);

    /// Rank of the read the controller serves next, if it is serving reads.
    std::optional<std::uint32_t> next_rank_hint() const;
    /// Bit r set when a transaction to rank r has waited at least nda_yield_age.
    std::uint32_t yield_mask(Cycle now) const;
    /// Banks of `rank` targeted by any queued transaction.
    std::uint32_t pending_bank_mask(std::uint32_t rank) const;

    std::vector<Transaction>& completed() { return completed_; }
    std::size_t read_occupancy() const { return reads_.size(); }
    std::size_t write_occupancy() const { return writes_.size(); }
    bool draining() const { return draining_; }
    bool idle() const { return reads_.empty() && writes_.empty(); }
    const std::vector<Transaction>& read_queue() const { return reads_; }
    const std::vector<Transaction>& write_queue() const { return writes_; }

private:
    struct Pick {
        DramCommand cmd;
        std::vector<Transaction>* queue = nullptr;
        std::size_t index = 0;
    };

    std::optional<Pick> choose(const ChannelState& table, Cycle now);
    bool row_hit_pending(const std::vector<Transaction>& q, const DramAddress& a, std::int32_t row) const;

    std::uint32_t channel_;
    Geometry geo_;
    TimingParams tp_;
    HostPolicy policy_;
    std::vector<Transaction> reads_;
    std::vector<Transaction> writes_;
    std::vector<Transaction> completed_;
    std::optional<Pick> last_pick_;
    bool draining_ = false;
    std::uint64_t next_id_ = 0;
};

/// Free-function forms.
bool enqueue(HostController& mc, const Transaction& txn, Cycle now);
std::optional<DramCommand> schedule(HostController& mc, const ChannelState& table, Cycle now);
std::optional<std::uint32_t> next_rank_hint(const HostController& mc);

}  // namespace ndasim

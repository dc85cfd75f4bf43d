#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "ndasim/host_mc.hpp"
#include "ndasim/kvconfig.hpp"
#include "ndasim/mapping.hpp"

namespace ndasim {

/// Synthetic host traffic. Each channel independently starts a transaction
/// with probability `rate` per cycle.
struct TrafficProfile {
    double rate = 0.0;            // per channel per cycle
    double read_fraction = 0.7;
    double row_locality = 0.5;    // probability the next access is the next column of the previous row
    std::uint64_t footprint = 0;  // bytes from the region base; 0 = the whole host region
    std::vector<double> rank_weights;  // per rank within a channel; empty = uniform
    std::uint64_t seed = 1;

    void validate(const Geometry& geo) const;
    static TrafficProfile from_config(const KeyValueConfig& kv);
};

/// Deterministic generator over one profile. Only addresses of the host
/// region are produced, so partitioned runs never touch reserved banks.
class TrafficGenerator {
public:
    TrafficGenerator(const TrafficProfile& profile, const AddressMapper& mapper);

    /// Transaction for `channel` started at `now`, if the channel's coin fires.
    std::optional<Transaction> next(std::uint32_t channel, Cycle now);

    const TrafficProfile& profile() const { return profile_; }

private:
    DramAddress fresh_address(std::uint32_t channel);

    TrafficProfile profile_;
    const AddressMapper* mapper_;
    std::uint64_t span_ = 0;
    std::vector<std::mt19937_64> rng_;  // one stream per channel
    std::vector<std::optional<DramAddress>> last_;
    std::discrete_distribution<std::uint32_t> rank_pick_;
    bool skewed_ = false;
};

struct TraceRecord {
    Cycle cycle = 0;
    TxnKind kind = TxnKind::Read;
    PhysicalAddress addr = 0;
    bool operator==(const TraceRecord&) const = default;
};

/// Text trace: one "cycle,R|W,0xADDR" per line; '#' starts a comment.
std::vector<TraceRecord> read_trace(std::istream& in);
void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace);

/// Idle-gap breakdown of one rank's host data bus.
struct IdleHistogram {
    static constexpr std::array<Cycle, 3> kEdges{10, 100, 250};
    std::array<std::uint64_t, 4> idle_cycles{};  // <10, 10-100, 100-250, >=250
    std::uint64_t gaps = 0;

    std::uint64_t total() const;
    double fraction(std::size_t bucket) const;
    void add_gap(Cycle len);
    IdleHistogram& operator+=(const IdleHistogram& o);
    bool operator==(const IdleHistogram&) const = default;
};

/// Per-rank idle histograms over [0, end) from the host commands of a log,
/// indexed channel * ranks + rank. A rank is busy while a host burst it
/// sources or sinks is on the bus.
std::vector<IdleHistogram> idle_histogram(const std::vector<DramCommand>& log, const Geometry& geo,
                                          const TimingParams& tp, Cycle end);

}  // namespace ndasim

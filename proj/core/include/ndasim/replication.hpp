#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ndasim/nda_fsm.hpp"

namespace ndasim {

/// Builds a replica FSM from a launch packet. The packet carries the seed, so
/// a replica and its NDA draw identical coin sequences.
NdaFsm replica_init(const NdaInstruction& in, std::uint64_t id, Cycle active_at, const AddressMapper& mapper,
                    const TimingParams& tp, const NdaPolicy& policy);

/// Advances a replica one cycle against the host's global state table. The
/// table already holds the host command of this cycle, which is how the
/// replica observes host activity.
std::optional<DramCommand> replica_step(NdaFsm& replica, ChannelState& table, Cycle now, const IssueSignals& sig);

/// Everything one rank's real NDA and its replica did during a run.
struct RankTrace {
    std::uint32_t channel = 0;
    std::uint32_t rank = 0;
    std::vector<DramCommand> predicted;
    std::vector<DramCommand> actual;
    std::vector<PhaseEvent> predicted_phases;
    std::vector<PhaseEvent> actual_phases;
    std::vector<NdaCompletion> predicted_done;
    std::vector<NdaCompletion> actual_done;
};

struct ReplicaLog {
    std::vector<RankTrace> ranks;
    /// First cycle at which the host table and device state disagreed, if any.
    std::optional<Cycle> table_mismatch;
};

struct SyncReport {
    bool clean = true;
    Cycle first_divergence = 0;
    std::uint32_t channel = 0;
    std::uint32_t rank = 0;
    std::string detail;
    std::uint64_t commands_compared = 0;
    std::uint64_t phase_events_compared = 0;
};

/// Cycle-by-cycle comparison of predicted versus actual NDA behavior.
SyncReport verify_sync(const ReplicaLog& log);

/// Merged "cycle,channel,rank,predicted,actual" dump for divergence debugging.
void write_replica_trace(std::ostream& out, const ReplicaLog& log);

}  // namespace ndasim

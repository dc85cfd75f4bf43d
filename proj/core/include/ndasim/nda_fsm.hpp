#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "ndasim/dram.hpp"
#include "ndasim/kvconfig.hpp"
#include "ndasim/nda.hpp"

namespace ndasim {

struct NdaPolicy {
    bool stochastic = false;        // gate NDA writes behind a coin with probability p
    double write_probability = 1.0;
    bool next_rank_hint = false;    // stall writes when the host predicts a read to this rank
    std::uint32_t lookahead = 16;   // accesses scanned for early ACT/PRE
    std::uint32_t write_phase_enter = 64;
    std::uint32_t write_buffer = 128;

    void validate() const;
    static NdaPolicy from_config(const KeyValueConfig& kv);
    /// Coin threshold out of 65536.
    std::uint32_t threshold() const;
};

/// Host-side signals, registered: values computed at the end of cycle t are
/// what the NDA sees during cycle t + 1.
struct IssueSignals {
    std::optional<std::uint32_t> hint;
    std::uint32_t pending_banks = 0;
    bool yield = false;  // a host request to this rank has waited too long
};

struct PhaseEvent {
    Cycle cycle = 0;
    bool enter = false;
    bool operator==(const PhaseEvent&) const = default;
};

struct NdaCompletion {
    std::uint64_t id = 0;
    Cycle finished = 0;   // cycle the last access issued
    Cycle data_done = 0;  // cycle the last data transfer ends
    bool operator==(const NdaCompletion&) const = default;
};

enum class PePhase : std::uint8_t { StreamX, ReadExec, WriteBack, Done };
std::string_view to_string(PePhase p);

/// Counter-based generator: draw k of a stream is SplitMix64(seed + k).
std::uint64_t splitmix64(std::uint64_t x);

/// Memory-issue state machine of one rank's NDA. The real NDA and the host's
/// replica are two instances of this class driven with identical inputs; the
/// replica steps against the host's global state table instead of the devices.
class NdaFsm {
public:
    NdaFsm(std::uint32_t channel, std::uint32_t rank, const AddressMapper& mapper, const TimingParams& tp,
           NdaPolicy policy);

    std::uint32_t channel() const { return channel_; }
    std::uint32_t rank() const { return rank_; }

    /// Queues an instruction that becomes runnable at `active_at`.
    void launch(const NdaInstruction& in, std::uint64_t id, Cycle active_at);

    /// Issues at most one command against `state` (applied in place).
    std::optional<DramCommand> step(Cycle now, ChannelState& state, const IssueSignals& sig);

    bool idle() const { return !stream_ && queue_.empty(); }
    std::size_t queued() const { return queue_.size() + (stream_ ? 1 : 0); }
    std::uint32_t write_buffer() const { return wb_; }
    bool in_write_phase() const { return write_phase_; }
    PePhase phase() const;
    /// Batch index of the access at the head of the current instruction.
    std::uint64_t batch() const;
    std::uint64_t rng_counter() const { return counter_; }
    /// Compares every architectural register and queued launch, not counters.
    bool same_registers(const NdaFsm& other) const;
    std::uint64_t coin_draws() const { return draws_; }
    std::uint64_t coin_rejects() const { return rejects_; }

    std::vector<NdaCompletion>& completions() { return completions_; }
    std::vector<PhaseEvent>& phase_events() { return phase_events_; }

    /// Negative control for the replica checker: flips the outcome of the
    /// coin draw with the given global index.
    void corrupt_draw(std::uint64_t index) { corrupt_index_ = index; }

    /// Live register bytes (PC, phase, batch, write-buffer count, RNG counter)
    /// excluding the instruction queue.
    static constexpr std::size_t kLiveRegisterBytes = 20;

private:
    struct Pending {
        NdaInstruction in;
        std::uint64_t id;
        Cycle active_at;
    };

    bool activate(Cycle now);
    void refill();
    void finish(Cycle now);
    bool coin();
    void note_phase(Cycle now);
    void issue(const DramCommand& c, ChannelState& state, Cycle now);

    std::uint32_t channel_;
    std::uint32_t rank_;
    const AddressMapper* mapper_;
    TimingParams tp_;
    NdaPolicy policy_;
    std::uint32_t threshold_;

    std::deque<Pending> queue_;
    std::optional<AccessStream> stream_;
    std::uint64_t cur_id_ = 0;
    std::uint64_t cur_seed_ = 0;
    std::uint64_t next_batch_ = 0;
    std::deque<std::int64_t> batch_starts_;  // sequence number of each batch's first access
    std::vector<Access> window_;
    std::size_t head_ = 0;
    std::int64_t base_seq_ = 0;  // sequence number of window_[0]
    static constexpr std::size_t kReadyRing = 1024;
    std::array<Cycle, kReadyRing> ready_{};
    Cycle last_done_ = 0;
    Cycle last_issue_ = 0;

    std::uint32_t wb_ = 0;
    bool write_phase_ = false;
    std::uint64_t counter_ = 0;  // per-instruction RNG counter
    std::uint64_t draws_ = 0;
    std::uint64_t rejects_ = 0;
    std::uint64_t corrupt_index_ = UINT64_MAX;

    std::vector<NdaCompletion> completions_;
    std::vector<PhaseEvent> phase_events_;
};

}  // namespace ndasim

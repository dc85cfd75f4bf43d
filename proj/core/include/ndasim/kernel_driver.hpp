#pragma once

#include <deque>
#include <memory>
#include <vector>

#include "ndasim/sim_config.hpp"

namespace ndasim {

class System;
using Ticket = std::uint64_t;

/// Keeps a set of ranks saturated with instructions of one opcode. Each rank
/// walks its own extent of shared operand vectors, so every instruction is
/// single-rank by construction.
class KernelDriver {
public:
    KernelDriver(System& sys, const KernelWorkload& w, std::vector<std::pair<std::uint32_t, std::uint32_t>> ranks);

    /// Launches instructions on ranks with fewer than `depth` in flight.
    void tick();
    std::uint64_t launched() const { return launched_; }

    /// The instruction the driver would launch next on a rank.
    NdaInstruction make_instruction(std::uint32_t channel, std::uint32_t rank, std::uint64_t start) const;

private:
    struct Slot {
        std::uint32_t channel;
        std::uint32_t rank;
        std::uint64_t next_start = 0;
        std::deque<Ticket> inflight;
    };

    System* sys_;
    KernelWorkload w_;
    std::vector<Slot> slots_;
    std::vector<std::shared_ptr<const DistVector>> vecs_;
    std::uint64_t span_ = 0;   // local blocks one instruction covers in its primary operand
    std::uint64_t kb_ = 0;     // GEMV row length in blocks
    std::uint32_t rows_ = 0;   // GEMV rows
    std::uint64_t limit_ = 0;  // local blocks available per operand
    std::uint64_t launched_ = 0;
};

}  // namespace ndasim

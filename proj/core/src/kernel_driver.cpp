#include "ndasim/kernel_driver.hpp"

#include <algorithm>

#include "ndasim/errors.hpp"
#include "ndasim/system.hpp"

namespace ndasim {

KernelDriver::KernelDriver(System& sys, const KernelWorkload& w,
                           std::vector<std::pair<std::uint32_t, std::uint32_t>> ranks)
    : sys_(&sys), w_(w) {
    for (auto [ch, r] : ranks) slots_.push_back({ch, r, 0, {}});
    Region& region = sys.operand_region(0);
    const bool shared = region.is_shared();
    const auto& layout = sys.layout();
    const std::uint64_t per_row = layout.blocks_per_rank(shared);

    std::vector<std::uint64_t> need;  // local blocks per operand
    if (w_.op == Opcode::GEMV) {
        kb_ = std::min<std::uint64_t>(w_.blocks, kBatchBlocks / 8);
        rows_ = static_cast<std::uint32_t>(std::max<std::uint64_t>(1, w_.blocks / kb_));
        span_ = kb_ * rows_;
        need = {span_ * 4, kb_, 2ull * rows_ * 4};
    } else {
        span_ = w_.blocks;
        need.assign(operand_count(w_.op), span_ * 4);
    }
    for (auto blocks : need) {
        const std::uint64_t rows = (std::max<std::uint64_t>(blocks, 1) + per_row - 1) / per_row;
        vecs_.push_back(DistVector::allocate(region, layout, rows * layout.system_row_bytes(shared)));
    }
    limit_ = vecs_.front()->local_blocks();
    if (w_.op == Opcode::GEMV) {
        // A is rounded up to whole system rows; y must still hold every batch A can host.
        const std::uint64_t batches = std::min<std::uint64_t>(limit_ / span_, vecs_[2]->local_blocks() / (2ull * rows_));
        limit_ = batches * span_;
    }
}

NdaInstruction KernelDriver::make_instruction(std::uint32_t channel, std::uint32_t rank, std::uint64_t start) const {
    NdaInstruction in;
    in.op = w_.op;
    in.type = w_.type;
    in.channel = channel;
    in.rank = rank;
    in.alpha = 1.5;
    in.beta = 0.5;
    in.gamma = 0.25;
    const std::uint64_t per_block = kBlockBytes / elem_bytes(w_.type);
    if (w_.op == Opcode::GEMV) {
        in.n = kb_ * per_block;
        in.rows = rows_;
        in.operands[0] = local_extent(vecs_[0], channel, rank, start);
        in.operands[1] = local_extent(vecs_[1], channel, rank, 0);
        in.operands[2] = local_extent(vecs_[2], channel, rank, (start / span_) * 2ull * rows_);
    } else {
        in.n = span_ * per_block;
        for (std::uint32_t i = 0; i < operand_count(w_.op); ++i) in.operands[i] = local_extent(vecs_[i], channel, rank, start);
    }
    return in;
}

void KernelDriver::tick() {
    for (auto& s : slots_) {
        while (!s.inflight.empty() && sys_->done(s.inflight.front())) s.inflight.pop_front();
        while (s.inflight.size() < w_.depth) {
            if (s.next_start + span_ > limit_) s.next_start = 0;
            NdaInstruction in = make_instruction(s.channel, s.rank, s.next_start);
            in.seed = splitmix64(sys_->config().seed ^ (0x9e37ull * (launched_ + 1)));
            s.inflight.push_back(sys_->launch(in, w_.functional));
            s.next_start += span_;
            ++launched_;
        }
    }
}

}  // namespace ndasim

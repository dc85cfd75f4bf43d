#include "ndasim/nda.hpp"

#include <cmath>

#include "ndasim/errors.hpp"

namespace ndasim {

namespace {

struct OpTraits {
    const char* name;
    std::uint32_t operands;
    std::array<std::int8_t, 3> reads;  // operand indices streamed from DRAM, -1 terminated
    std::int8_t output;                // -1 when nothing is written back
    std::uint32_t fma_per_element;
};

const OpTraits& traits(Opcode op) {
    static const OpTraits table[] = {
        {"AXPBY", 3, {0, 1, -1}, 2, 2},
        {"AXPBYPCZ", 4, {0, 1, 2}, 3, 3},
        {"AXPY", 2, {0, 1, -1}, 1, 1},
        {"COPY", 2, {0, -1, -1}, 1, 0},
        {"XMY", 3, {0, 1, -1}, 2, 1},
        {"DOT", 2, {0, 1, -1}, -1, 1},
        {"NRM2", 1, {0, -1, -1}, -1, 1},
        {"SCAL", 1, {0, -1, -1}, 0, 1},
        {"GEMV", 3, {0, 1, -1}, 2, 1},
    };
    return table[static_cast<std::size_t>(op)];
}

template <typename T>
class ElementView {
public:
    ElementView(const NdaInstruction& in, std::uint32_t operand) : op_(in.operands[operand]) {}

    PhysicalAddress addr(std::uint64_t e) const {
        constexpr std::uint64_t epb = kBlockBytes / sizeof(T);
        const std::uint64_t blk = op_.start + e / epb;
        if (blk != cached_block_) {
            cached_block_ = blk;
            cached_addr_ = op_.vec->block_paddr(op_.channel, op_.rank, blk);
        }
        return cached_addr_ + (e % epb) * sizeof(T);
    }
    T get(const BackingStore& m, std::uint64_t e) const { return m.load<T>(addr(e)); }
    void set(BackingStore& m, std::uint64_t e, T v) const { m.store<T>(addr(e), v); }

private:
    const Operand& op_;
    mutable std::uint64_t cached_block_ = UINT64_MAX;
    mutable PhysicalAddress cached_addr_ = 0;
};

// Lane bookkeeping: within a block, chip c owns bytes [8c, 8c + 8). A chip's
// elements are numbered in stream order; lane = that number mod 2.
template <typename T>
std::size_t lane_slot(std::uint64_t e) {
    constexpr std::uint64_t epb = kBlockBytes / sizeof(T);
    constexpr std::uint64_t epc = kChipBytesPerBurst / sizeof(T);
    const std::uint64_t in_block = e % epb;
    const std::uint64_t chip = in_block / epc;
    const std::uint64_t chip_local = (e / epb) * epc + in_block % epc;
    return static_cast<std::size_t>(chip * kLanesPerChip + chip_local % kLanesPerChip);
}

template <typename T>
LanePartials run_kernel(const NdaInstruction& in, BackingStore& mem) {
    const T a = static_cast<T>(in.alpha);
    const T b = static_cast<T>(in.beta);
    const T c = static_cast<T>(in.gamma);
    const std::uint64_t n = in.n;
    LanePartials out;
    switch (in.op) {
        case Opcode::AXPBY: {
            ElementView<T> x(in, 0), y(in, 1), z(in, 2);
            for (std::uint64_t e = 0; e < n; ++e) z.set(mem, e, std::fma(a, x.get(mem, e), b * y.get(mem, e)));
            break;
        }
        case Opcode::AXPBYPCZ: {
            ElementView<T> x(in, 0), y(in, 1), z(in, 2), w(in, 3);
            for (std::uint64_t e = 0; e < n; ++e) {
                w.set(mem, e, std::fma(a, x.get(mem, e), std::fma(b, y.get(mem, e), c * z.get(mem, e))));
            }
            break;
        }
        case Opcode::AXPY: {
            ElementView<T> x(in, 0), y(in, 1);
            for (std::uint64_t e = 0; e < n; ++e) y.set(mem, e, std::fma(a, y.get(mem, e), x.get(mem, e)));
            break;
        }
        case Opcode::COPY: {
            ElementView<T> x(in, 0), y(in, 1);
            for (std::uint64_t e = 0; e < n; ++e) y.set(mem, e, x.get(mem, e));
            break;
        }
        case Opcode::XMY: {
            ElementView<T> x(in, 0), y(in, 1), z(in, 2);
            for (std::uint64_t e = 0; e < n; ++e) z.set(mem, e, x.get(mem, e) * y.get(mem, e));
            break;
        }
        case Opcode::SCAL: {
            ElementView<T> x(in, 0);
            for (std::uint64_t e = 0; e < n; ++e) x.set(mem, e, a * x.get(mem, e));
            break;
        }
        case Opcode::DOT:
        case Opcode::NRM2: {
            ElementView<T> x(in, 0);
            std::optional<ElementView<T>> y;
            if (in.op == Opcode::DOT) y.emplace(in, 1);
            std::vector<T> acc(kChipsPerRank * kLanesPerChip, T(0));
            for (std::uint64_t e = 0; e < n; ++e) {
                const T xv = x.get(mem, e);
                const T yv = y ? y->get(mem, e) : xv;
                auto& s = acc[lane_slot<T>(e)];
                s = std::fma(xv, yv, s);
            }
            out.assign(acc.begin(), acc.end());
            break;
        }
        case Opcode::GEMV: {
            constexpr std::uint64_t epb = kBlockBytes / sizeof(T);
            const std::uint64_t kb = (n + epb - 1) / epb;
            ElementView<T> A(in, 0), x(in, 1);
            const Operand& yop = in.operands[2];
            out.reserve(std::size_t{in.rows} * kChipsPerRank * kLanesPerChip);
            for (std::uint32_t r = 0; r < in.rows; ++r) {
                std::vector<T> acc(kChipsPerRank * kLanesPerChip, T(0));
                const std::uint64_t row0 = std::uint64_t{r} * kb * epb;
                for (std::uint64_t e = 0; e < n; ++e) {
                    auto& s = acc[lane_slot<T>(e)];
                    s = std::fma(A.get(mem, row0 + e), x.get(mem, e), s);
                }
                for (std::uint32_t lane = 0; lane < kLanesPerChip; ++lane) {
                    const PhysicalAddress blk =
                        yop.vec->block_paddr(yop.channel, yop.rank, yop.start + 2ull * r + lane);
                    for (std::uint32_t chip = 0; chip < kChipsPerRank; ++chip) {
                        BackingStore::Block zero{};
                        mem.write(blk + chip * kChipBytesPerBurst, zero.data(), kChipBytesPerBurst);
                        mem.store<T>(blk + chip * kChipBytesPerBurst, acc[chip * kLanesPerChip + lane]);
                    }
                }
                out.insert(out.end(), acc.begin(), acc.end());
            }
            break;
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(Opcode op) { return traits(op).name; }

Opcode parse_opcode(std::string_view s) {
    for (auto op : kAllOpcodes) {
        if (s == traits(op).name) return op;
    }
    throw ConfigError("opcode", "unknown NDA opcode '" + std::string(s) + "'");
}

Operand local_extent(std::shared_ptr<const DistVector> vec, std::uint32_t channel, std::uint32_t rank,
                     std::uint64_t start, bool resident) {
    return Operand{std::move(vec), channel, rank, start, resident};
}

std::uint32_t operand_count(Opcode op) { return traits(op).operands; }

std::optional<std::uint32_t> output_operand(Opcode op) {
    const auto o = traits(op).output;
    if (o < 0) return std::nullopt;
    return static_cast<std::uint32_t>(o);
}

std::uint64_t operand_blocks(const NdaInstruction& in) {
    const std::uint64_t bytes = in.n * elem_bytes(in.type);
    return (bytes + kBlockBytes - 1) / kBlockBytes;
}

std::uint64_t fma_count(const NdaInstruction& in) {
    const std::uint64_t per = traits(in.op).fma_per_element;
    return in.op == Opcode::GEMV ? per * in.n * in.rows : per * in.n;
}

void validate_instruction(const NdaInstruction& in, const AddressMapper& mapper) {
    const auto& tr = traits(in.op);
    for (std::uint32_t i = 0; i < tr.operands; ++i) {
        const auto& o = in.operands[i];
        if (!o.vec) throw BoundsViolation(std::string(tr.name) + ": operand " + std::to_string(i) + " missing");
        if (o.channel != in.channel || o.rank != in.rank) {
            throw LocalityViolation(std::string(tr.name) + ": operand " + std::to_string(i) +
                                    " is not in the target rank");
        }
    }
    if (in.n == 0) throw BoundsViolation("vector length must be positive");
    const std::uint64_t accessed = in.op == Opcode::GEMV ? in.n * in.rows : in.n;
    if (accessed > in.bound) {
        throw BoundsViolation(std::string(tr.name) + ": " + std::to_string(accessed) + " elements exceed bound " +
                              std::to_string(in.bound));
    }
    const std::uint64_t blocks = operand_blocks(in);
    auto need = [&](std::uint32_t i, std::uint64_t count) {
        const auto& o = in.operands[i];
        if (o.start + count > o.vec->local_blocks()) {
            throw BoundsViolation(std::string(tr.name) + ": operand " + std::to_string(i) + " extent past the end");
        }
        const auto a = mapper.map(o.vec->block_paddr(o.channel, o.rank, o.start));
        if (a.channel != in.channel || a.rank != in.rank) {
            throw LocalityViolation(std::string(tr.name) + ": operand " + std::to_string(i) + " maps to another rank");
        }
    };
    if (in.op == Opcode::GEMV) {
        if (in.rows == 0) throw BoundsViolation("GEMV needs at least one row");
        if (blocks > kBatchBlocks) throw BoundsViolation("GEMV row does not fit the 1KB scratchpad");
        need(0, blocks * in.rows);
        need(1, blocks);
        need(2, 2ull * in.rows);
    } else {
        for (std::uint32_t i = 0; i < tr.operands; ++i) need(i, blocks);
    }
}

LanePartials execute_functional(const NdaInstruction& in, BackingStore& mem) {
    return in.type == ElemType::F32 ? run_kernel<float>(in, mem) : run_kernel<double>(in, mem);
}

AccessStream::AccessStream(const NdaInstruction& in, const AddressMapper& mapper) : in_(in), mapper_(&mapper) {
    blocks_ = operand_blocks(in_);
    if (in_.op == Opcode::GEMV) {
        rows_per_batch_ = static_cast<std::uint32_t>(std::max<std::uint64_t>(1, kBatchBlocks / kLanesPerChip / blocks_));
        batches_ = (in_.rows + rows_per_batch_ - 1) / rows_per_batch_;
    } else {
        batches_ = (blocks_ + kBatchBlocks - 1) / kBatchBlocks;
    }
}

DramAddress AccessStream::addr_of(std::uint32_t operand, std::uint64_t local_block) const {
    const auto& o = in_.operands[operand];
    return mapper_->map(o.vec->block_paddr(o.channel, o.rank, o.start + local_block));
}

void AccessStream::append_batch(std::uint64_t b, std::vector<Access>& out, std::int64_t first_seq) const {
    std::int64_t seq = first_seq;
    auto push = [&](const Access& a) {
        out.push_back(a);
        return seq++;
    };
    std::uint32_t ready_at_start = 0;
    std::size_t first_write = SIZE_MAX;
    auto finish = [&] {
        if (ready_at_start > 0 && first_write != SIZE_MAX) out[first_write].preload = static_cast<std::uint16_t>(ready_at_start);
    };

    if (in_.op == Opcode::GEMV) {
        const auto& A = in_.operands[0];
        const auto& x = in_.operands[1];
        const auto& y = in_.operands[2];
        if (b == 0 && !x.resident) {
            for (std::uint64_t i = 0; i < blocks_; ++i) push({CommandKind::RD, addr_of(1, i), -1, 0, 0, 1});
        }
        const std::uint64_t r0 = b * rows_per_batch_;
        const std::uint64_t r1 = std::min<std::uint64_t>(in_.rows, r0 + rows_per_batch_);
        std::vector<std::int64_t> last_read(r1 - r0, -1);
        for (std::uint64_t r = r0; r < r1; ++r) {
            if (A.resident) continue;
            for (std::uint64_t i = 0; i < blocks_; ++i) {
                const bool last = i + 1 == blocks_;
                const auto s = push({CommandKind::RD, addr_of(0, r * blocks_ + i), -1,
                                     static_cast<std::uint8_t>(last && !y.resident ? 2 : 0), 0, 0});
                if (last) last_read[r - r0] = s;
            }
        }
        if (!y.resident) {
            for (std::uint64_t r = r0; r < r1; ++r) {
                for (std::uint64_t lane = 0; lane < kLanesPerChip; ++lane) {
                    if (first_write == SIZE_MAX) first_write = out.size();
                    push({CommandKind::WR, addr_of(2, 2 * r + lane), last_read[r - r0], 0, 0, 2});
                }
                if (A.resident) ready_at_start += kLanesPerChip;
            }
        }
        finish();
        return;
    }

    const auto& tr = traits(in_.op);
    const std::uint64_t lo = b * kBatchBlocks;
    const std::uint64_t cnt = std::min<std::uint64_t>(kBatchBlocks, blocks_ - lo);
    const bool writes = tr.output >= 0 && !in_.operands[static_cast<std::size_t>(tr.output)].resident;
    std::int8_t producer = -1;
    for (auto r : tr.reads) {
        if (r >= 0 && !in_.operands[static_cast<std::size_t>(r)].resident) producer = r;
    }
    std::int64_t producer_seq0 = -1;
    for (auto r : tr.reads) {
        if (r < 0 || in_.operands[static_cast<std::size_t>(r)].resident) continue;
        const bool prod = writes && r == producer;
        for (std::uint64_t i = 0; i < cnt; ++i) {
            const auto s = push({CommandKind::RD, addr_of(static_cast<std::uint32_t>(r), lo + i), -1,
                                 static_cast<std::uint8_t>(prod ? 1 : 0), 0, static_cast<std::uint8_t>(r)});
            if (prod && i == 0) producer_seq0 = s;
        }
    }
    if (writes) {
        const auto o = static_cast<std::uint32_t>(tr.output);
        for (std::uint64_t i = 0; i < cnt; ++i) {
            const std::int64_t dep = producer_seq0 < 0 ? -1 : producer_seq0 + static_cast<std::int64_t>(i);
            if (first_write == SIZE_MAX) first_write = out.size();
            push({CommandKind::WR, addr_of(o, lo + i), dep, 0, 0, static_cast<std::uint8_t>(o)});
        }
        if (producer_seq0 < 0) ready_at_start = static_cast<std::uint32_t>(cnt);
    }
    finish();
}

}  // namespace ndasim

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "ndasim/layout.hpp"
#include "ndasim/types.hpp"

namespace ndasim {

enum class Opcode : std::uint8_t { AXPBY, AXPBYPCZ, AXPY, COPY, XMY, DOT, NRM2, SCAL, GEMV };
inline constexpr std::array<Opcode, 9> kAllOpcodes{Opcode::AXPBY, Opcode::AXPBYPCZ, Opcode::AXPY,
                                                   Opcode::COPY,  Opcode::XMY,      Opcode::DOT,
                                                   Opcode::NRM2,  Opcode::SCAL,     Opcode::GEMV};
std::string_view to_string(Opcode op);
Opcode parse_opcode(std::string_view s);

enum class ElemType : std::uint8_t { F32, F64 };
inline std::uint32_t elem_bytes(ElemType t) { return t == ElemType::F32 ? 4 : 8; }

/// A rank-local extent of a distributed vector. `resident` operands already
/// sit in the PE scratchpad and generate no DRAM traffic.
struct Operand {
    std::shared_ptr<const DistVector> vec;
    std::uint32_t channel = 0;  // rank that holds this extent
    std::uint32_t rank = 0;
    std::uint64_t start = 0;    // first local block
    bool resident = false;
};

/// Convenience constructor for a rank-local extent.
Operand local_extent(std::shared_ptr<const DistVector> vec, std::uint32_t channel, std::uint32_t rank,
                     std::uint64_t start = 0, bool resident = false);

/// Operand roles, in order:
///   AXPBY x y z | AXPBYPCZ x y z w | AXPY x y | COPY x y | XMY x y z
///   DOT x y | NRM2 x | SCAL x | GEMV A x y
/// GEMV: `n` is the row length, `rows` the row count; y receives per-lane
/// partial sums, two blocks per row (lane 0 then lane 1, one word per chip).
struct NdaInstruction {
    Opcode op = Opcode::COPY;
    ElemType type = ElemType::F64;
    std::uint32_t channel = 0;
    std::uint32_t rank = 0;
    std::array<Operand, 4> operands{};
    std::uint64_t n = 0;
    std::uint32_t rows = 0;
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;
    std::uint64_t bound = UINT64_MAX;
    std::uint64_t seed = 0;  // stochastic-issue seed carried by the launch packet
};

std::uint32_t operand_count(Opcode op);
/// Index of the operand written back to DRAM, if any.
std::optional<std::uint32_t> output_operand(Opcode op);
/// Number of 64B blocks per vector operand (per GEMV row for GEMV).
std::uint64_t operand_blocks(const NdaInstruction& in);
std::uint64_t fma_count(const NdaInstruction& in);
inline constexpr std::uint32_t kLanesPerChip = 2;
inline constexpr std::uint32_t kChipsPerRank = kBlockBytes / kChipBytesPerBurst;

/// Throws LocalityViolation / BoundsViolation.
void validate_instruction(const NdaInstruction& in, const AddressMapper& mapper);

/// Per-lane accumulators of one rank: index chip * 2 + lane.
using LanePartials = std::vector<double>;

/// Applies the instruction's memory effect to `mem` and returns lane partials
/// (DOT/NRM2; GEMV returns rows * chips * 2 partials; otherwise empty).
LanePartials execute_functional(const NdaInstruction& in, BackingStore& mem);

/// One rank-level column access of the PE microcode stream.
struct Access {
    CommandKind kind = CommandKind::RD;
    DramAddress addr;
    std::int64_t dep = -1;      // sequence number of the read whose data this write needs
    std::uint8_t produces = 0;  // write-buffer entries created when this read issues
    std::uint16_t preload = 0;  // entries that exist once this access reaches the head
    std::uint8_t operand = 0;
};

/// Deterministic access stream of an instruction, generated batch by batch
/// (one batch = 1KB per chip of the primary operand).
class AccessStream {
public:
    AccessStream(const NdaInstruction& in, const AddressMapper& mapper);

    std::uint64_t batches() const { return batches_; }
    const NdaInstruction& instruction() const { return in_; }
    /// Appends batch b to `out`; `first_seq` is the sequence number the first
    /// appended access receives. Writes whose inputs are all scratchpad
    /// resident are announced through the `preload` field of the batch's first write.
    void append_batch(std::uint64_t b, std::vector<Access>& out, std::int64_t first_seq) const;

private:
    DramAddress addr_of(std::uint32_t operand, std::uint64_t local_block) const;

    NdaInstruction in_;
    const AddressMapper* mapper_;
    std::uint64_t blocks_ = 0;
    std::uint64_t batches_ = 0;
    std::uint32_t rows_per_batch_ = 0;
};

inline constexpr std::uint32_t kBatchBlocks = 128;  // 1KB per chip

}  // namespace ndasim

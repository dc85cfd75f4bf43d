#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ndasim/kvconfig.hpp"
#include "ndasim/types.hpp"

namespace ndasim {

using PhysicalAddress = std::uint64_t;

enum class MappingMode : std::uint8_t { Baseline, Partitioned };

/// Physical -> DRAM address mapping expressed as one XOR mask per output bit.
/// Each mask selects physical address bits whose parity yields that output bit,
/// so the whole mapping is a GF(2) matrix over bits [6, address_bits).
/// Bits [0, 6) are the byte offset within a 64B block and pass through.
struct MappingConfig {
    Geometry geometry;
    std::vector<std::uint64_t> channel_masks;
    std::vector<std::uint64_t> rank_masks;
    std::vector<std::uint64_t> bank_masks;
    std::vector<std::uint64_t> row_masks;
    std::vector<std::uint64_t> column_masks;
    MappingMode mode = MappingMode::Baseline;
    std::uint32_t reserved_banks = 0;  // per rank; only meaningful when Partitioned

    /// Skylake-like hashed layout for the given geometry: channel and bank bits
    /// XOR a low physical bit with a row bit, rank bits are drawn from row bits,
    /// and the top physical bits feed only row bits.
    static MappingConfig make_default(const Geometry& geo, MappingMode mode = MappingMode::Baseline,
                                      std::uint32_t reserved_banks = 0);

    unsigned address_bits() const;
    /// Throws ConfigError on wrong mask counts, non-invertible matrix, or a
    /// Partitioned layout whose top bits feed anything but the row MSBs.
    void validate() const;

    static MappingConfig from_config(const KeyValueConfig& kv, const Geometry& geo);
    void to_config(std::ostream& os) const;
};

/// Precomputed mapper: forward map, inverse, partition swap and coloring.
class AddressMapper {
public:
    explicit AddressMapper(MappingConfig cfg);

    const MappingConfig& config() const { return cfg_; }
    const Geometry& geometry() const { return cfg_.geometry; }
    std::uint64_t capacity() const { return capacity_; }

    DramAddress map(PhysicalAddress paddr) const;
    PhysicalAddress unmap(const DramAddress& addr) const;
    /// Pure GF(2) product without the partition stage.
    DramAddress map_baseline(PhysicalAddress paddr) const;
    PhysicalAddress unmap_baseline(const DramAddress& addr) const;
    DramAddress partition_remap(const DramAddress& initial, PhysicalAddress paddr) const;

    std::uint32_t color_of(PhysicalAddress paddr) const;
    std::uint32_t color_count() const { return 1u << color_bits_.size(); }
    const std::vector<unsigned>& color_bits() const { return color_bits_; }

    // Bank partitioning layout.
    std::uint32_t first_reserved_bank() const { return cfg_.geometry.banks - cfg_.reserved_banks; }
    bool is_reserved_bank(std::uint32_t bank) const {
        return cfg_.mode == MappingMode::Partitioned && bank >= first_reserved_bank();
    }
    std::uint64_t host_region_bytes() const;
    bool in_shared_region(PhysicalAddress paddr) const {
        return cfg_.mode == MappingMode::Partitioned && paddr >= host_region_bytes();
    }

    /// Bytes of one system row: one DRAM row in every bank that the region spans.
    std::uint64_t system_row_bytes() const;
    std::uint64_t shared_system_row_bytes() const;

    /// Rank of the GF(2) matrix (equals output bit count iff invertible).
    static unsigned gf2_rank(std::vector<std::uint64_t> rows);

private:
    MappingConfig cfg_;
    std::uint64_t capacity_ = 0;
    unsigned addr_bits_ = 0;
    unsigned chunk_bits_ = 0;
    // Output-bit masks flattened in the order column, channel, bank, rank, row.
    std::vector<std::uint64_t> forward_;
    // inverse_[i] = mask over flattened output bits producing physical bit 6 + i.
    std::vector<std::uint64_t> inverse_;
    std::vector<unsigned> color_bits_;
};

DramAddress map_physical(const AddressMapper& m, PhysicalAddress paddr);
DramAddress partition_remap(const AddressMapper& m, const DramAddress& initial, PhysicalAddress paddr);
std::uint32_t color_of(const AddressMapper& m, PhysicalAddress paddr);

/// Chip that stores a byte of a 64B block: each chip owns 8 contiguous bytes.
/// Throws OutOfRange for offsets outside the block.
std::uint32_t word_home(std::uint32_t block_offset);

unsigned log2_exact(std::uint64_t v, const char* what);

}  // namespace ndasim

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <unordered_map>
#include <vector>

#include "ndasim/allocator.hpp"
#include "ndasim/mapping.hpp"

namespace ndasim {

/// Rank-local element order used by the NDAs. Every rank sees its share of a
/// system row as P blocks; local block L of a vector lives in system row L / P
/// at byte offset offsets[L % P]. The offset table is derived from DRAM
/// coordinates so that consecutive local blocks alternate bank groups and walk
/// columns within an open row. Offsets are shared by every system row of a
/// color, so equal local indices of two same-color vectors are co-located.
class NdaLayout {
public:
    explicit NdaLayout(const AddressMapper& mapper);

    const AddressMapper& mapper() const { return *mapper_; }
    std::uint64_t system_row_bytes(bool shared) const;
    std::uint32_t blocks_per_rank(bool shared) const;
    /// Offsets within a system row for the rank (channel, rank) of a color.
    const std::vector<std::uint32_t>& offsets(bool shared, std::uint32_t color, std::uint32_t channel,
                                              std::uint32_t rank) const;

private:
    std::vector<std::uint32_t> build(bool shared, std::uint32_t color, std::uint32_t channel, std::uint32_t rank) const;

    const AddressMapper* mapper_;
    mutable std::map<std::tuple<bool, std::uint32_t, std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> cache_;
};

/// A vector allocated in whole system rows of one color and spread over all
/// ranks. Element addressing inside each rank follows NdaLayout.
struct DistVector {
    std::vector<PhysicalAddress> system_rows;
    std::uint64_t bytes = 0;
    std::uint32_t color = 0;
    bool shared = false;
    const NdaLayout* layout = nullptr;

    static std::shared_ptr<DistVector> allocate(Region& region, const NdaLayout& layout, std::uint64_t bytes);

    /// Local blocks available in each rank.
    std::uint64_t local_blocks() const { return system_rows.size() * layout->blocks_per_rank(shared); }
    /// Physical address of local block L in (channel, rank). Throws BoundsViolation past the end.
    PhysicalAddress block_paddr(std::uint32_t channel, std::uint32_t rank, std::uint64_t local_block) const;
};

/// Sparse functional memory image keyed by 64B block; untouched blocks read as zero.
class BackingStore {
public:
    using Block = std::array<std::uint8_t, kBlockBytes>;

    void read(PhysicalAddress addr, void* out, std::size_t len) const;
    void write(PhysicalAddress addr, const void* in, std::size_t len);

    template <typename T>
    T load(PhysicalAddress addr) const {
        T v;
        read(addr, &v, sizeof(T));
        return v;
    }
    template <typename T>
    void store(PhysicalAddress addr, T v) {
        write(addr, &v, sizeof(T));
    }
    std::size_t touched_blocks() const { return blocks_.size(); }

private:
    std::unordered_map<std::uint64_t, Block> blocks_;
};

}  // namespace ndasim

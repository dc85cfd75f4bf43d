#pragma once

#include <cstdint>
#include <vector>

#include "ndasim/mapping.hpp"

namespace ndasim {

struct PhysicalRange {
    PhysicalAddress base = 0;
    std::uint64_t bytes = 0;

    bool operator==(const PhysicalRange&) const = default;
};

/// One color's pool of system rows. A system row is one DRAM row in every bank
/// the pool spans, so every allocation starts at offset 0 of a system row and
/// same-offset bytes of two allocations land in the same channel and rank.
///
/// The shared pool of a partitioned mapping covers the reserved banks only and
/// has a single color.
class Region {
public:
    /// Host pool of the given color (host-only region when partitioned).
    static Region host(const AddressMapper& mapper, std::uint32_t color);
    /// Shared pool in the reserved banks; requires a partitioned mapping.
    static Region shared(const AddressMapper& mapper);

    std::uint32_t color() const { return color_; }
    bool is_shared() const { return shared_; }
    std::uint64_t system_row_bytes() const { return row_bytes_; }
    std::size_t total_rows() const { return rows_.size(); }
    std::size_t free_rows() const;

    /// First-fit allocation of ceil(size / system_row_bytes) rows. Throws
    /// OutOfColorCapacity when the pool cannot satisfy the request.
    std::vector<PhysicalRange> allocate(std::uint64_t size);
    void release(const std::vector<PhysicalRange>& ranges);

private:
    Region(std::uint32_t color, bool shared, std::uint64_t row_bytes) : color_(color), shared_(shared), row_bytes_(row_bytes) {}

    std::uint32_t color_ = 0;
    bool shared_ = false;
    std::uint64_t row_bytes_ = 0;
    std::vector<PhysicalAddress> rows_;  // base of every system row in the pool, ascending
    std::vector<bool> used_;
};

/// Free-function form: allocate from a region.
std::vector<PhysicalRange> allocate(Region& region, std::uint64_t size);

}  // namespace ndasim

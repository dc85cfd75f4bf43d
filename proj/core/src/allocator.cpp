#include "ndasim/allocator.hpp"

#include <algorithm>

#include "ndasim/errors.hpp"

namespace ndasim {

Region Region::host(const AddressMapper& mapper, std::uint32_t color) {
    if (color >= mapper.color_count()) throw OutOfRange("color " + std::to_string(color) + " does not exist");
    Region r(color, false, mapper.system_row_bytes());
    const std::uint64_t n = mapper.host_region_bytes() / r.row_bytes_;
    for (std::uint64_t k = 0; k < n; ++k) {
        const PhysicalAddress base = k * r.row_bytes_;
        if (mapper.color_of(base) == color) r.rows_.push_back(base);
    }
    r.used_.assign(r.rows_.size(), false);
    return r;
}

Region Region::shared(const AddressMapper& mapper) {
    if (mapper.config().mode != MappingMode::Partitioned) {
        throw ConfigError("map.mode", "a shared region needs a partitioned mapping");
    }
    Region r(0, true, mapper.shared_system_row_bytes());
    const PhysicalAddress start = mapper.host_region_bytes();
    for (PhysicalAddress p = start; p < mapper.capacity(); p += r.row_bytes_) r.rows_.push_back(p);
    r.used_.assign(r.rows_.size(), false);
    return r;
}

std::size_t Region::free_rows() const {
    return static_cast<std::size_t>(std::count(used_.begin(), used_.end(), false));
}

std::vector<PhysicalRange> Region::allocate(std::uint64_t size) {
    if (size == 0) throw OutOfRange("allocation size must be positive");
    const std::uint64_t need = (size + row_bytes_ - 1) / row_bytes_;
    if (need > free_rows()) {
        throw OutOfColorCapacity("color " + std::to_string(color_) + " has " + std::to_string(free_rows()) +
                                 " free system rows, " + std::to_string(need) + " requested");
    }
    std::vector<PhysicalRange> out;
    for (std::size_t i = 0; i < rows_.size() && out.size() < need; ++i) {
        if (used_[i]) continue;
        used_[i] = true;
        out.push_back({rows_[i], row_bytes_});
    }
    return out;
}

void Region::release(const std::vector<PhysicalRange>& ranges) {
    for (const auto& r : ranges) {
        auto it = std::lower_bound(rows_.begin(), rows_.end(), r.base);
        if (it == rows_.end() || *it != r.base) throw OutOfRange("range was not allocated from this region");
        used_[static_cast<std::size_t>(it - rows_.begin())] = false;
    }
}

std::vector<PhysicalRange> allocate(Region& region, std::uint64_t size) { return region.allocate(size); }

}  // namespace ndasim

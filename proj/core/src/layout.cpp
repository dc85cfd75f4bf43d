#include "ndasim/layout.hpp"

#include <algorithm>
#include <set>

#include "ndasim/errors.hpp"

namespace ndasim {

NdaLayout::NdaLayout(const AddressMapper& mapper) : mapper_(&mapper) {}

std::uint64_t NdaLayout::system_row_bytes(bool shared) const {
    return shared ? mapper_->shared_system_row_bytes() : mapper_->system_row_bytes();
}

std::uint32_t NdaLayout::blocks_per_rank(bool shared) const {
    const auto& g = mapper_->geometry();
    return static_cast<std::uint32_t>(system_row_bytes(shared) / kBlockBytes / g.rank_count());
}

const std::vector<std::uint32_t>& NdaLayout::offsets(bool shared, std::uint32_t color, std::uint32_t channel,
                                                     std::uint32_t rank) const {
    const auto key = std::make_tuple(shared, color, channel, rank);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, build(shared, color, channel, rank)).first;
    return it->second;
}

std::vector<std::uint32_t> NdaLayout::build(bool shared, std::uint32_t color, std::uint32_t channel,
                                            std::uint32_t rank) const {
    const auto& m = *mapper_;
    const auto& geo = m.geometry();
    const std::uint64_t srow = system_row_bytes(shared);
    PhysicalAddress base = 0;
    if (shared) {
        base = m.host_region_bytes();
    } else {
        bool found = false;
        for (PhysicalAddress p = 0; p < m.host_region_bytes(); p += srow) {
            if (m.color_of(p) == color) {
                base = p;
                found = true;
                break;
            }
        }
        if (!found) throw OutOfRange("color " + std::to_string(color) + " has no system rows");
    }

    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, std::uint32_t> where;  // (row, bank, col)
    std::set<std::uint32_t> rows, banks;
    for (std::uint64_t off = 0; off < srow; off += kBlockBytes) {
        const auto a = m.map(base + off);
        if (a.channel != channel || a.rank != rank) continue;
        where[{a.row, a.bank, a.column}] = static_cast<std::uint32_t>(off);
        rows.insert(a.row);
        banks.insert(a.bank);
    }
    if (where.size() != rows.size() * banks.size() * geo.columns) {
        throw ConfigError("map", "a system row does not cover whole DRAM rows; NDA layout unsupported");
    }

    // Bank tuples take one bank from each represented group so that
    // consecutive blocks switch groups (short column-to-column delay).
    std::vector<std::vector<std::uint32_t>> by_group(geo.bank_groups);
    for (auto b : banks) by_group[geo.group_of(b)].push_back(b);
    std::erase_if(by_group, [](const auto& v) { return v.empty(); });
    bool balanced = true;
    for (const auto& g : by_group) balanced = balanced && g.size() == by_group.front().size();
    std::vector<std::vector<std::uint32_t>> tuples;
    if (balanced) {
        for (std::size_t t = 0; t < by_group.front().size(); ++t) {
            std::vector<std::uint32_t> tup;
            for (const auto& g : by_group) tup.push_back(g[t]);
            tuples.push_back(std::move(tup));
        }
    } else {
        for (auto b : banks) tuples.push_back({b});
    }

    std::vector<std::uint32_t> out;
    out.reserve(where.size());
    for (auto row : rows) {
        for (const auto& tup : tuples) {
            for (std::uint32_t col = 0; col < geo.columns; ++col) {
                for (auto b : tup) out.push_back(where.at({row, b, col}));
            }
        }
    }
    return out;
}

std::shared_ptr<DistVector> DistVector::allocate(Region& region, const NdaLayout& layout, std::uint64_t bytes) {
    auto v = std::make_shared<DistVector>();
    for (const auto& r : region.allocate(bytes)) v->system_rows.push_back(r.base);
    v->bytes = bytes;
    v->color = region.color();
    v->shared = region.is_shared();
    v->layout = &layout;
    return v;
}

PhysicalAddress DistVector::block_paddr(std::uint32_t channel, std::uint32_t rank, std::uint64_t local_block) const {
    const std::uint32_t per = layout->blocks_per_rank(shared);
    const std::uint64_t j = local_block / per;
    if (j >= system_rows.size()) {
        throw BoundsViolation("local block " + std::to_string(local_block) + " beyond vector extent");
    }
    const auto& offs = layout->offsets(shared, color, channel, rank);
    return system_rows[j] + offs[local_block % per];
}

void BackingStore::read(PhysicalAddress addr, void* out, std::size_t len) const {
    auto* dst = static_cast<std::uint8_t*>(out);
    while (len > 0) {
        const std::uint64_t blk = addr / kBlockBytes;
        const std::size_t off = addr % kBlockBytes;
        const std::size_t n = std::min<std::size_t>(len, kBlockBytes - off);
        auto it = blocks_.find(blk);
        if (it == blocks_.end()) std::memset(dst, 0, n);
        else std::memcpy(dst, it->second.data() + off, n);
        dst += n;
        addr += n;
        len -= n;
    }
}

void BackingStore::write(PhysicalAddress addr, const void* in, std::size_t len) {
    const auto* src = static_cast<const std::uint8_t*>(in);
    while (len > 0) {
        const std::uint64_t blk = addr / kBlockBytes;
        const std::size_t off = addr % kBlockBytes;
        const std::size_t n = std::min<std::size_t>(len, kBlockBytes - off);
        auto [it, fresh] = blocks_.try_emplace(blk);
        if (fresh) it->second.fill(0);
        std::memcpy(it->second.data() + off, src, n);
        src += n;
        addr += n;
        len -= n;
    }
}

}  // namespace ndasim

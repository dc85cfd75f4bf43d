#include "ndasim/mapping.hpp"

#include <bit>
#include <ostream>
#include <sstream>

#include "ndasim/errors.hpp"

namespace ndasim {

namespace {

inline unsigned parity(std::uint64_t v) { return static_cast<unsigned>(std::popcount(v) & 1); }

inline std::uint64_t bit(unsigned i) { return std::uint64_t{1} << i; }

struct FieldBits {
    unsigned column, channel, bank, rank, row;
    unsigned total() const { return column + channel + bank + rank + row; }
};

FieldBits field_bits(const Geometry& g) {
    return {log2_exact(g.columns, "geometry.columns"), log2_exact(g.channels, "geometry.channels"),
            log2_exact(g.banks, "geometry.banks"), log2_exact(g.ranks, "geometry.ranks"),
            log2_exact(g.rows, "geometry.rows")};
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

}  // namespace

unsigned log2_exact(std::uint64_t v, const char* what) {
    if (v == 0 || !std::has_single_bit(v)) throw ConfigError(what, "must be a power of two");
    return static_cast<unsigned>(std::countr_zero(v));
}

std::uint32_t word_home(std::uint32_t block_offset) {
    if (block_offset >= kBlockBytes) throw OutOfRange("block offset " + std::to_string(block_offset) + " >= 64");
    return block_offset / kChipBytesPerBurst;
}

MappingConfig MappingConfig::make_default(const Geometry& geo, MappingMode mode, std::uint32_t reserved_banks) {
    const FieldBits fb = field_bits(geo);
    MappingConfig cfg;
    cfg.geometry = geo;
    cfg.mode = mode;
    cfg.reserved_banks = reserved_banks;
    cfg.column_masks.assign(fb.column, 0);
    cfg.channel_masks.assign(fb.channel, 0);
    cfg.bank_masks.assign(fb.bank, 0);
    cfg.rank_masks.assign(fb.rank, 0);
    cfg.row_masks.assign(fb.row, 0);

    unsigned pos = 6;
    auto take = [&](std::uint64_t& mask) { mask |= bit(pos++); };
    const unsigned low_cols = std::min(2u, fb.column);
    for (unsigned i = 0; i < low_cols; ++i) take(cfg.column_masks[i]);
    for (unsigned i = 0; i < fb.channel; ++i) take(cfg.channel_masks[i]);
    if (fb.bank > 0) take(cfg.bank_masks[fb.bank - 1]);  // bank-group bit interleaves early
    const unsigned mid_cols = std::min(4u, fb.column);
    for (unsigned i = low_cols; i < mid_cols; ++i) take(cfg.column_masks[i]);
    for (unsigned i = 0; i + 1 < fb.bank; ++i) take(cfg.bank_masks[i]);
    for (unsigned i = mid_cols; i < fb.column; ++i) take(cfg.column_masks[i]);
    for (unsigned i = 0; i < fb.rank; ++i) take(cfg.rank_masks[i]);
    const unsigned row_base = pos;
    for (unsigned i = 0; i < fb.row; ++i) take(cfg.row_masks[i]);

    // XOR sources are low row bits; the top log2(banks) row bits stay pure so
    // the same matrix supports bank partitioning.
    const unsigned usable = fb.row > fb.bank ? fb.row - fb.bank : 0;
    unsigned src = 0;
    auto hash_with_row = [&](std::uint64_t& mask) {
        if (src < usable) mask |= bit(row_base + src++);
    };
    for (unsigned i = 0; i < fb.channel; ++i) hash_with_row(cfg.channel_masks[i]);
    for (unsigned i = 0; i < fb.rank; ++i) {
        hash_with_row(cfg.rank_masks[i]);
        hash_with_row(cfg.rank_masks[i]);
    }
    for (unsigned i = 0; i < fb.bank; ++i) hash_with_row(cfg.bank_masks[i]);
    return cfg;
}

unsigned MappingConfig::address_bits() const {
    return 6 + field_bits(geometry).total();
}

void MappingConfig::validate() const {
    const FieldBits fb = field_bits(geometry);
    if (geometry.bank_groups == 0 || geometry.banks % geometry.bank_groups != 0) {
        throw ConfigError("geometry.bank_groups", "must divide the bank count");
    }
    if (geometry.chips == 0) throw ConfigError("geometry.chips", "must be positive");
    auto check_count = [](const std::vector<std::uint64_t>& v, unsigned n, const char* name) {
        if (v.size() != n) {
            throw ConfigError(name, "expected " + std::to_string(n) + " masks, got " + std::to_string(v.size()));
        }
    };
    check_count(column_masks, fb.column, "map.column");
    check_count(channel_masks, fb.channel, "map.channel");
    check_count(bank_masks, fb.bank, "map.bank");
    check_count(rank_masks, fb.rank, "map.rank");
    check_count(row_masks, fb.row, "map.row");
    const unsigned abits = address_bits();
    if (abits > 63) throw ConfigError("geometry", "address space wider than 63 bits");
    const std::uint64_t legal = (bit(abits) - 1) & ~std::uint64_t{63};

    std::vector<std::uint64_t> rows;
    for (const auto* v : {&column_masks, &channel_masks, &bank_masks, &rank_masks, &row_masks}) {
        for (auto m : *v) {
            if (m == 0 || (m & ~legal)) throw ConfigError("map", "mask " + hex(m) + " is empty or out of range");
            rows.push_back(m);
        }
    }
    if (AddressMapper::gf2_rank(rows) != rows.size()) {
        throw ConfigError("map", "mapping matrix is not invertible over GF(2)");
    }

    if (mode == MappingMode::Partitioned) {
        if (reserved_banks == 0 || reserved_banks >= geometry.banks) {
            throw ConfigError("map.reserved_banks", "must be in [1, banks)");
        }
        if (fb.row < fb.bank) throw ConfigError("map.row", "need at least log2(banks) row bits to partition");
        const unsigned top = abits - fb.bank;
        const std::uint64_t top_mask = legal & ~(bit(top) - 1);
        for (const auto* v : {&column_masks, &channel_masks, &bank_masks, &rank_masks}) {
            for (auto m : *v) {
                if (m & top_mask) throw ConfigError("map", "top chunk bits may only feed row bits");
            }
        }
        for (unsigned k = 0; k < fb.row; ++k) {
            const bool msb = k >= fb.row - fb.bank;
            if (msb && row_masks[k] != bit(top + (k - (fb.row - fb.bank)))) {
                throw ConfigError("map.row." + std::to_string(k), "row MSBs must equal the top chunk bits");
            }
            if (!msb && (row_masks[k] & top_mask)) {
                throw ConfigError("map.row." + std::to_string(k), "top chunk bits may only feed row MSBs");
            }
        }
    }
}

MappingConfig MappingConfig::from_config(const KeyValueConfig& kv, const Geometry& geo) {
    const auto mode_s = kv.get_string("map.mode", "baseline");
    MappingMode mode;
    if (mode_s == "baseline") mode = MappingMode::Baseline;
    else if (mode_s == "partitioned") mode = MappingMode::Partitioned;
    else throw ConfigError("map.mode", "expected baseline or partitioned");
    const auto reserved = static_cast<std::uint32_t>(
        kv.get_uint("map.reserved_banks", mode == MappingMode::Partitioned ? 1 : 0));
    MappingConfig cfg = make_default(geo, mode, reserved);
    auto load = [&](std::vector<std::uint64_t>& v, const char* name) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = kv.get_uint(std::string("map.") + name + "." + std::to_string(i), v[i]);
        }
        if (kv.has(std::string("map.") + name + "." + std::to_string(v.size()))) {
            throw ConfigError(std::string("map.") + name, "more masks than the geometry has bits");
        }
    };
    load(cfg.column_masks, "column");
    load(cfg.channel_masks, "channel");
    load(cfg.bank_masks, "bank");
    load(cfg.rank_masks, "rank");
    load(cfg.row_masks, "row");
    cfg.validate();
    return cfg;
}

void MappingConfig::to_config(std::ostream& os) const {
    os << "map.mode = " << (mode == MappingMode::Partitioned ? "partitioned" : "baseline") << '\n';
    os << "map.reserved_banks = " << reserved_banks << '\n';
    auto dump = [&](const std::vector<std::uint64_t>& v, const char* name) {
        for (std::size_t i = 0; i < v.size(); ++i) os << "map." << name << '.' << i << " = " << hex(v[i]) << '\n';
    };
    dump(channel_masks, "channel");
    dump(rank_masks, "rank");
    dump(bank_masks, "bank");
    dump(row_masks, "row");
    dump(column_masks, "column");
}

unsigned AddressMapper::gf2_rank(std::vector<std::uint64_t> rows) {
    unsigned rank = 0;
    for (unsigned col = 0; col < 64 && rank < rows.size(); ++col) {
        std::size_t piv = rank;
        while (piv < rows.size() && !(rows[piv] & bit(col))) ++piv;
        if (piv == rows.size()) continue;
        std::swap(rows[rank], rows[piv]);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r != rank && (rows[r] & bit(col))) rows[r] ^= rows[rank];
        }
        ++rank;
    }
    return rank;
}

AddressMapper::AddressMapper(MappingConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto& g = cfg_.geometry;
    capacity_ = g.capacity();
    addr_bits_ = cfg_.address_bits();
    chunk_bits_ = log2_exact(g.banks, "geometry.banks");
    for (const auto* v : {&cfg_.column_masks, &cfg_.channel_masks, &cfg_.bank_masks, &cfg_.rank_masks,
                          &cfg_.row_masks}) {
        for (auto m : *v) forward_.push_back(m >> 6);
    }
    const std::size_t n = forward_.size();
    // Gauss-Jordan on [M | I]; afterwards row i holds e_i | row i of M^-1.
    std::vector<std::uint64_t> left = forward_;
    std::vector<std::uint64_t> right(n);
    for (std::size_t j = 0; j < n; ++j) right[j] = bit(static_cast<unsigned>(j));
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        while (!(left[piv] & bit(static_cast<unsigned>(col)))) ++piv;
        std::swap(left[col], left[piv]);
        std::swap(right[col], right[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r != col && (left[r] & bit(static_cast<unsigned>(col)))) {
                left[r] ^= left[col];
                right[r] ^= right[col];
            }
        }
    }
    inverse_ = std::move(right);

    const unsigned shift = static_cast<unsigned>(std::countr_zero(system_row_bytes()));
    std::uint64_t color_mask = 0;
    for (auto m : cfg_.channel_masks) color_mask |= m;
    for (auto m : cfg_.rank_masks) color_mask |= m;
    color_mask &= ~(bit(shift) - 1);
    for (unsigned b = 0; b < 64; ++b) {
        if (color_mask & bit(b)) color_bits_.push_back(b);
    }
}

std::uint64_t AddressMapper::host_region_bytes() const {
    if (cfg_.mode != MappingMode::Partitioned) return capacity_;
    return capacity_ / cfg_.geometry.banks * (cfg_.geometry.banks - cfg_.reserved_banks);
}

std::uint64_t AddressMapper::system_row_bytes() const {
    return cfg_.geometry.row_bytes() * cfg_.geometry.total_banks();
}

std::uint64_t AddressMapper::shared_system_row_bytes() const {
    const auto& g = cfg_.geometry;
    return g.row_bytes() * g.channels * g.ranks * cfg_.reserved_banks;
}

DramAddress AddressMapper::map_baseline(PhysicalAddress paddr) const {
    if (paddr >= capacity_) throw OutOfRange("physical address beyond capacity");
    const std::uint64_t in = paddr >> 6;
    std::size_t k = 0;
    auto field = [&](std::size_t nbits) {
        std::uint32_t v = 0;
        for (std::size_t i = 0; i < nbits; ++i) v |= parity(in & forward_[k++]) << i;
        return v;
    };
    DramAddress a;
    a.column = field(cfg_.column_masks.size());
    a.channel = field(cfg_.channel_masks.size());
    a.bank = field(cfg_.bank_masks.size());
    a.rank = field(cfg_.rank_masks.size());
    a.row = field(cfg_.row_masks.size());
    return a;
}

PhysicalAddress AddressMapper::unmap_baseline(const DramAddress& a) const {
    std::uint64_t out = 0;
    unsigned k = 0;
    auto put = [&](std::uint32_t v, std::size_t nbits) {
        for (std::size_t i = 0; i < nbits; ++i) out |= std::uint64_t{(v >> i) & 1u} << k++;
    };
    put(a.column, cfg_.column_masks.size());
    put(a.channel, cfg_.channel_masks.size());
    put(a.bank, cfg_.bank_masks.size());
    put(a.rank, cfg_.rank_masks.size());
    put(a.row, cfg_.row_masks.size());
    std::uint64_t p = 0;
    for (std::size_t i = 0; i < inverse_.size(); ++i) p |= std::uint64_t{parity(out & inverse_[i])} << i;
    return p << 6;
}

DramAddress AddressMapper::partition_remap(const DramAddress& initial, PhysicalAddress paddr) const {
    if (!is_reserved_bank(initial.bank)) return initial;
    const unsigned row_bits = static_cast<unsigned>(cfg_.row_masks.size());
    const unsigned msb_shift = row_bits - chunk_bits_;
    const std::uint32_t low = initial.row & ((1u << msb_shift) - 1);
    DramAddress out = initial;
    out.bank = static_cast<std::uint32_t>(paddr >> (addr_bits_ - chunk_bits_));
    out.row = low | (initial.bank << msb_shift);
    return out;
}

DramAddress AddressMapper::map(PhysicalAddress paddr) const {
    if (paddr >= capacity_) throw OutOfRange("physical address beyond capacity");
    if (cfg_.mode == MappingMode::Baseline) return map_baseline(paddr);
    const auto& g = cfg_.geometry;
    if (paddr >= host_region_bytes()) {
        // Shared region: direct (non-hashed) layout into the reserved banks.
        std::uint64_t t = (paddr - host_region_bytes()) >> 6;
        DramAddress a;
        a.column = static_cast<std::uint32_t>(t % g.columns);
        t /= g.columns;
        a.channel = static_cast<std::uint32_t>(t % g.channels);
        t /= g.channels;
        a.rank = static_cast<std::uint32_t>(t % g.ranks);
        t /= g.ranks;
        a.row = static_cast<std::uint32_t>(t % g.rows);
        a.bank = first_reserved_bank() + static_cast<std::uint32_t>(t / g.rows);
        return a;
    }
    return partition_remap(map_baseline(paddr), paddr);
}

PhysicalAddress AddressMapper::unmap(const DramAddress& a) const {
    const auto& g = cfg_.geometry;
    if (a.channel >= g.channels || a.rank >= g.ranks || a.bank >= g.banks || a.row >= g.rows ||
        a.column >= g.columns) {
        throw OutOfRange("DRAM address outside geometry: " + to_string(a));
    }
    if (cfg_.mode == MappingMode::Baseline) return unmap_baseline(a);
    if (is_reserved_bank(a.bank)) {
        std::uint64_t t = a.bank - first_reserved_bank();
        t = t * g.rows + a.row;
        t = t * g.ranks + a.rank;
        t = t * g.channels + a.channel;
        t = t * g.columns + a.column;
        return host_region_bytes() + (t << 6);
    }
    const unsigned msb_shift = static_cast<unsigned>(cfg_.row_masks.size()) - chunk_bits_;
    const std::uint32_t msb = a.row >> msb_shift;
    if (is_reserved_bank(msb)) {
        DramAddress initial = a;
        initial.bank = msb;
        initial.row = (a.row & ((1u << msb_shift) - 1)) | (a.bank << msb_shift);
        return unmap_baseline(initial);
    }
    return unmap_baseline(a);
}

std::uint32_t AddressMapper::color_of(PhysicalAddress paddr) const {
    if (paddr >= capacity_) throw OutOfRange("physical address beyond capacity");
    if (in_shared_region(paddr)) return 0;
    std::uint32_t c = 0;
    for (std::size_t i = 0; i < color_bits_.size(); ++i) c |= static_cast<std::uint32_t>((paddr >> color_bits_[i]) & 1) << i;
    return c;
}

DramAddress map_physical(const AddressMapper& m, PhysicalAddress paddr) { return m.map(paddr); }

DramAddress partition_remap(const AddressMapper& m, const DramAddress& initial, PhysicalAddress paddr) {
    return m.partition_remap(initial, paddr);
}

std::uint32_t color_of(const AddressMapper& m, PhysicalAddress paddr) { return m.color_of(paddr); }

}  // namespace ndasim

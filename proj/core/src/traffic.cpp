#include "ndasim/traffic.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ndasim/errors.hpp"

namespace ndasim {

void TrafficProfile::validate(const Geometry& geo) const {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("traffic.rate", "must lie in [0, 1]");
    if (!(read_fraction >= 0.0 && read_fraction <= 1.0)) {
        throw ConfigError("traffic.read_fraction", "must lie in [0, 1]");
    }
    if (!(row_locality >= 0.0 && row_locality <= 1.0)) {
        throw ConfigError("traffic.row_locality", "must lie in [0, 1]");
    }
    if (!rank_weights.empty()) {
        if (rank_weights.size() != geo.ranks) throw ConfigError("traffic.rank_weights", "need one weight per rank");
        double sum = 0;
        for (double w : rank_weights) {
            if (w < 0) throw ConfigError("traffic.rank_weights", "weights must be nonnegative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("traffic.rank_weights", "weights must sum to 1");
    }
}

TrafficProfile TrafficProfile::from_config(const KeyValueConfig& kv) {
    TrafficProfile p;
    p.rate = kv.get_double("traffic.rate", p.rate);
    p.read_fraction = kv.get_double("traffic.read_fraction", p.read_fraction);
    p.row_locality = kv.get_double("traffic.row_locality", p.row_locality);
    p.footprint = kv.get_uint("traffic.footprint", p.footprint);
    p.seed = kv.get_uint("traffic.seed", p.seed);
    if (auto w = kv.raw("traffic.rank_weights")) {
        std::stringstream ss(*w);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto one = KeyValueConfig::from_string("w=" + item);
            p.rank_weights.push_back(one.get_double("w", 0.0));
        }
    }
    return p;
}

TrafficGenerator::TrafficGenerator(const TrafficProfile& profile, const AddressMapper& mapper)
    : profile_(profile), mapper_(&mapper) {
    const auto& geo = mapper.config().geometry;
    profile_.validate(geo);
    span_ = mapper.host_region_bytes();
    if (profile_.footprint != 0) span_ = std::min(span_, profile_.footprint);
    span_ &= ~std::uint64_t{kBlockBytes - 1};
    if (span_ == 0) throw ConfigError("traffic.footprint", "must cover at least one block");
    std::seed_seq seq{profile_.seed, std::uint64_t{0x7261666669}};
    std::vector<std::uint64_t> seeds(geo.channels);
    seq.generate(seeds.begin(), seeds.end());
    for (auto s : seeds) rng_.emplace_back(s);
    last_.resize(geo.channels);
    if (!profile_.rank_weights.empty()) {
        skewed_ = true;
        rank_pick_ = std::discrete_distribution<std::uint32_t>(profile_.rank_weights.begin(), profile_.rank_weights.end());
    }
}

DramAddress TrafficGenerator::fresh_address(std::uint32_t channel) {
    auto& g = rng_[channel];
    const std::uint32_t want_rank = skewed_ ? rank_pick_(g) : UINT32_MAX;
    std::uniform_int_distribution<std::uint64_t> block(0, span_ / kBlockBytes - 1);
    // Rejection sampling: the mapping spreads consecutive blocks over every
    // channel and rank, so acceptance is roughly 1 / (channels * ranks).
    for (int tries = 0; tries < 1 << 16; ++tries) {
        const auto a = mapper_->map(block(g) * kBlockBytes);
        if (a.channel == channel && (want_rank == UINT32_MAX || a.rank == want_rank)) return a;
    }
    throw ConfigError("traffic.footprint", "footprint does not reach the requested channel and rank");
}

std::optional<Transaction> TrafficGenerator::next(std::uint32_t channel, Cycle /*now*/) {
    if (profile_.rate <= 0.0) return std::nullopt;
    auto& g = rng_[channel];
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(g) >= profile_.rate) return std::nullopt;
    Transaction t;
    t.kind = u(g) < profile_.read_fraction ? TxnKind::Read : TxnKind::Write;
    const auto& geo = mapper_->config().geometry;
    auto& last = last_[channel];
    if (last && u(g) < profile_.row_locality) {
        DramAddress a = *last;
        a.column = (a.column + 1) % geo.columns;
        t.addr = a;
    } else {
        t.addr = fresh_address(channel);
    }
    t.paddr = mapper_->unmap(t.addr);
    last = t.addr;
    return t;
}

std::vector<TraceRecord> read_trace(std::istream& in) {
    std::vector<TraceRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::stringstream ss(line);
        std::string cyc, kind, addr;
        if (!std::getline(ss, cyc, ',') || !std::getline(ss, kind, ',') || !std::getline(ss, addr)) {
            throw ConfigError("trace", "line " + std::to_string(lineno) + ": expected cycle,R|W,addr");
        }
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        kind = trim(kind);
        TraceRecord r;
        try {
            r.cycle = std::stoll(trim(cyc));
            r.addr = std::stoull(trim(addr), nullptr, 16);
        } catch (const std::exception&) {
            throw ConfigError("trace", "line " + std::to_string(lineno) + ": bad number");
        }
        if (kind == "R") r.kind = TxnKind::Read;
        else if (kind == "W") r.kind = TxnKind::Write;
        else throw ConfigError("trace", "line " + std::to_string(lineno) + ": kind must be R or W");
        if (!out.empty() && r.cycle < out.back().cycle) {
            throw ConfigError("trace", "line " + std::to_string(lineno) + ": cycles must be nondecreasing");
        }
        out.push_back(r);
    }
    return out;
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace) {
    for (const auto& r : trace) {
        out << r.cycle << ',' << (r.kind == TxnKind::Read ? 'R' : 'W') << ",0x" << std::hex << r.addr << std::dec
            << '\n';
    }
}

std::uint64_t IdleHistogram::total() const { return std::accumulate(idle_cycles.begin(), idle_cycles.end(), std::uint64_t{0}); }

double IdleHistogram::fraction(std::size_t bucket) const {
    const auto t = total();
    return t == 0 ? 0.0 : static_cast<double>(idle_cycles.at(bucket)) / static_cast<double>(t);
}

void IdleHistogram::add_gap(Cycle len) {
    if (len <= 0) return;
    std::size_t b = 0;
    while (b < kEdges.size() && len >= kEdges[b]) ++b;
    idle_cycles[b] += static_cast<std::uint64_t>(len);
    ++gaps;
}

IdleHistogram& IdleHistogram::operator+=(const IdleHistogram& o) {
    for (std::size_t i = 0; i < idle_cycles.size(); ++i) idle_cycles[i] += o.idle_cycles[i];
    gaps += o.gaps;
    return *this;
}

std::vector<IdleHistogram> idle_histogram(const std::vector<DramCommand>& log, const Geometry& geo,
                                          const TimingParams& tp, Cycle end) {
    const std::size_t n = static_cast<std::size_t>(geo.channels) * geo.ranks;
    std::vector<std::vector<std::pair<Cycle, Cycle>>> busy(n);
    for (const auto& c : log) {
        if (c.source != Source::Host || !is_column(c.kind)) continue;
        const Cycle start = c.issue_cycle + (c.kind == CommandKind::RD ? tp.tCL : tp.tCWL);
        busy[c.target.channel * geo.ranks + c.target.rank].emplace_back(start, start + tp.tBL);
    }
    std::vector<IdleHistogram> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& b = busy[i];
        std::sort(b.begin(), b.end());
        Cycle cursor = 0;
        for (const auto& [s, e] : b) {
            if (s >= end) break;
            out[i].add_gap(s - cursor);
            cursor = std::max(cursor, std::min(e, end));
        }
        out[i].add_gap(end - cursor);
    }
    return out;
}

}  // namespace ndasim

// Acceptance checks C1..C11. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
//
//   ndasim_acceptance [--runs N] [--only C5,C6] [--expect-fail C6]
//
// Criteria named in --expect-fail still print FAIL but do not change the exit
// status; every other failure does.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "ndasim/audit.hpp"
#include "ndasim/errors.hpp"
#include "ndasim/svrg.hpp"
#include "ndasim/system.hpp"

using namespace ndasim;

namespace {

// Pinned thresholds.
constexpr int kFuzzRuns = 1000;
constexpr Cycle kFuzzCycles = 100000;
constexpr double kReductionRelTol = 1e-12;
constexpr double kBankPartitionMinRatio = 1.3;
constexpr double kThrottleSlack = 0.05;
constexpr double kCoarseGrainMinRatio = 1.5;
constexpr double kZeroTrafficCeilingShare = 0.90;
constexpr double kLowTrafficIdleShare = 0.80;
constexpr double kRankScalingMinRatio = 2.0 * 0.95;
constexpr double kSvrgOptimumGap = 1e-6;
constexpr double kEnergyRelTol = 1e-12;

// Experiment settings shared by the bandwidth criteria.
constexpr Cycle kExperimentCycles = 200000;
constexpr const char* kHighTraffic = "traffic.rate=0.2\n";
constexpr const char* kModerateTraffic = "traffic.rate=0.05\n";
constexpr const char* kLowTraffic = "traffic.rate=0.01\n";

struct Outcome {
    bool pass = false;
    std::string detail;
};

SimConfig make_config(const std::string& text) { return SimConfig::from_config(KeyValueConfig::from_string(text)); }

StatsReport simulate(const std::string& text) {
    System sys(make_config(text + "sim.cycles=" + std::to_string(kExperimentCycles) + "\nsim.record_log=false\n"));
    return sys.run();
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream os;
    os.precision(prec);
    os << std::fixed << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// C1, C2, C11 (conservation): randomized fuzz runs

std::string random_config(std::mt19937_64& rng, int index) {
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto pick = [&](auto... vs) {
        const std::vector<std::common_type_t<decltype(vs)...>> v{vs...};
        return v[rng() % v.size()];
    };
    std::ostringstream c;
    const int channels = pick(1, 2);
    const int ranks = pick(1, 2, 4);
    c << "geometry.channels=" << channels << "\ngeometry.ranks=" << ranks << "\ngeometry.rows=" << pick(4096, 65536) << "\n";
    const bool partitioned = rng() % 2 == 0;
    c << "map.mode=" << (partitioned ? "partitioned" : "baseline") << "\n";
    if (partitioned) c << "map.reserved_banks=" << pick(1, 2, 4) << "\n";

    c << "traffic.rate=" << pick(0.0, uni(0.0, 0.05), uni(0.05, 0.3)) << "\ntraffic.read_fraction=" << uni(0.0, 1.0)
      << "\ntraffic.row_locality=" << uni(0.0, 0.95) << "\n";
    const bool rank_partition = ranks >= 2 && rng() % 6 == 0;
    if (ranks > 1 && !rank_partition && rng() % 3 == 0) {
        std::vector<double> w(ranks);
        double s = 0;
        for (auto& x : w) s += (x = uni(0.05, 1.0));
        // Round to two decimals and give the remainder to the last rank so the
        // printed weights sum to exactly 1 after parsing.
        c << "traffic.rank_weights=";
        int used = 0;
        for (int r = 0; r + 1 < ranks; ++r) {
            const int pct = std::max(1, static_cast<int>(100 * w[r] / s));
            used += pct;
            c << pct / 100.0 << ",";
        }
        c << (100 - used) / 100.0;
        c << "\n";
    }
    if (rank_partition) c << "sim.rank_partition=true\n";

    if (rng() % 10 != 0) {
        const Opcode op = kAllOpcodes[rng() % kAllOpcodes.size()];
        c << "kernel.op=" << to_string(op) << "\nkernel.type=" << pick("f32", "f64") << "\nkernel.blocks="
          << pick(1, 8, 64, 512) << "\nkernel.depth=" << pick(1, 2, 3) << "\n";
    }
    if (rng() % 2 == 0) c << "nda.stochastic=true\nnda.write_probability=" << pick(1.0, 0.5, 0.25, 0.0625, uni(0.0, 1.0)) << "\n";
    c << "nda.next_rank_hint=" << (rng() % 2 ? "true" : "false") << "\n";
    c << "host.nda_yield_age=" << pick(64, 256, 1024) << "\n";
    c << "sim.seed=" << 1000 + index << "\nsim.cycles=" << kFuzzCycles << "\n";
    return c.str();
}

// Energy ledger recomputed from the command log; must agree exactly.
bool ledger_conserved(const System& sys, std::string* why) {
    const auto& e = sys.energy();
    std::uint64_t act = 0, host = 0, pe = 0;
    for (const auto& c : sys.command_log()) {
        if (c.kind == CommandKind::ACT) ++act;
        if (is_column(c.kind)) (c.source == Source::Host ? host : pe)++;
    }
    std::int64_t sum = 0;
    for (std::size_t k = 0; k < kEnergyEventKinds; ++k) {
        const auto ev = static_cast<EnergyEvent>(k);
        sum += static_cast<std::int64_t>(e.count(ev)) * e.unit_fj(ev);
    }
    const bool counts = e.count(EnergyEvent::Act) == act && e.count(EnergyEvent::HostBurst) == host &&
                        e.count(EnergyEvent::PeBurst) == pe && e.count(EnergyEvent::BufferAccess) == pe * kChipsPerRank;
    const bool sums = sum == e.event_fj() && e.total_nj() == e.event_nj() + e.leakage_nj();
    if (!(counts && sums) && why) {
        *why = "ledger act=" + std::to_string(e.count(EnergyEvent::Act)) + "/" + std::to_string(act) +
               " host=" + std::to_string(e.count(EnergyEvent::HostBurst)) + "/" + std::to_string(host) +
               " pe=" + std::to_string(e.count(EnergyEvent::PeBurst)) + "/" + std::to_string(pe);
    }
    return counts && sums;
}

struct FuzzSummary {
    int runs = 0;
    int audit_dirty = 0;
    int desynced = 0;
    int energy_broken = 0;
    std::string first_audit, first_desync, first_energy;
    bool negative_control = false;
    std::string negative_detail;
    double seconds = 0;
};

FuzzSummary fuzz(int runs) {
    FuzzSummary s;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(0xC0FFEE);
    for (int i = 0; i < runs; ++i) {
        const std::string text = random_config(rng, i);
        ++s.runs;
        std::optional<System> holder;
        try {
            holder.emplace(make_config(text));
            holder->run();
        } catch (const std::exception& e) {
            if (s.audit_dirty++ == 0) s.first_audit = "run " + std::to_string(i) + " threw: " + e.what();
            if (std::getenv("NDASIM_FUZZ_VERBOSE")) std::cerr << "run " << i << " threw: " << e.what() << "\n" << text << "\n";
            continue;
        }
        System& sys = *holder;
        const auto v = audit_log(sys.command_log(), sys.config().timing, sys.config().geometry);
        if (!v.empty()) {
            if (s.audit_dirty++ == 0) s.first_audit = "run " + std::to_string(i) + ": " + v.front().rule;
        }
        const auto sync = sys.verify();
        if (!sync.clean) {
            if (s.desynced++ == 0) s.first_desync = "run " + std::to_string(i) + ": " + sync.detail;
        }
        std::string why;
        if (!ledger_conserved(sys, &why)) {
            if (s.energy_broken++ == 0) s.first_energy = "run " + std::to_string(i) + ": " + why;
        }
    }

    // Negative control: a single flipped coin in one replica must surface.
    {
        System sys(make_config("kernel.op=COPY\nnda.stochastic=true\nnda.write_probability=0.5\ntraffic.rate=0.02\n"
                               "sim.cycles=50000\n"));
        sys.corrupt_replica_draw(0, 1, 100);
        sys.run();
        const auto sync = sys.verify();
        s.negative_control = !sync.clean;
        s.negative_detail = sync.clean ? "corrupted replica reported CLEAN"
                                       : "divergence at cycle " + std::to_string(sync.first_divergence);
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

// ---------------------------------------------------------------------------
// C3: mapping

Outcome c3_mapping() {
    const Geometry small{1, 1, 4, 2, 64, 16, 8};
    std::uint64_t checked = 0;
    for (auto mode : {MappingMode::Baseline, MappingMode::Partitioned}) {
        AddressMapper m(MappingConfig::make_default(small, mode, mode == MappingMode::Partitioned ? 1 : 0));
        std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>> seen;
        std::map<std::pair<std::uint32_t, std::uint64_t>, std::pair<std::uint32_t, std::uint32_t>> home;
        const std::uint64_t srow = m.system_row_bytes();
        for (std::uint64_t p = 0; p < m.capacity(); p += kBlockBytes) {
            const auto a = m.map(p);
            if (!seen.insert({a.channel, a.rank, a.bank, a.row, a.column}).second) return {false, "duplicate image"};
            if (m.unmap(a) != p) return {false, "unmap(map(p)) != p"};
            if (mode == MappingMode::Partitioned && m.in_shared_region(p) != m.is_reserved_bank(a.bank)) {
                return {false, "partition containment broken at " + std::to_string(p)};
            }
            if (!m.in_shared_region(p)) {
                auto [it, fresh] = home.try_emplace({m.color_of(p), p % srow}, a.channel, a.rank);
                if (!fresh && it->second != std::make_pair(a.channel, a.rank)) return {false, "operand alignment broken"};
            }
            ++checked;
        }
        if (seen.size() != m.capacity() / kBlockBytes) return {false, "not onto"};
    }
    const auto full = MappingConfig::make_default(Geometry{});
    std::vector<std::uint64_t> rows;
    for (const auto* v : {&full.column_masks, &full.channel_masks, &full.bank_masks, &full.rank_masks, &full.row_masks}) {
        rows.insert(rows.end(), v->begin(), v->end());
    }
    const unsigned rank = AddressMapper::gf2_rank(rows);
    if (rank != rows.size()) return {false, "default matrix rank " + std::to_string(rank)};
    return {true, std::to_string(checked) + " blocks bijective/contained/aligned; default GF(2) rank " + std::to_string(rank) +
                      "/" + std::to_string(rows.size())};
}

// ---------------------------------------------------------------------------
// C4: functional kernels against scalar references

template <typename T>
struct Reference {
    static constexpr std::uint64_t epb = kBlockBytes / sizeof(T);
    static constexpr std::uint64_t epc = kChipBytesPerBurst / sizeof(T);
    // Documented accumulation order: each of the 16 (chip, lane) accumulators
    // sums its elements with fused multiply-add in stream order; the host then
    // adds accumulators chip-major, lane-minor.
    static std::size_t slot(std::uint64_t e) {
        const std::uint64_t chip = (e % epb) / epc;
        const std::uint64_t nth = (e / epb) * epc + (e % epb) % epc;
        return static_cast<std::size_t>(chip * 2 + nth % 2);
    }
};

template <typename T>
Outcome c4_type(std::mt19937_64& rng, int shapes, std::uint64_t* compared) {
    const SimConfig cfg = make_config("");
    AddressMapper mapper(cfg.mapping);
    NdaLayout layout(mapper);
    Region region = Region::host(mapper, 0);
    auto vec = [&](std::uint64_t blocks) {
        const std::uint64_t per = layout.blocks_per_rank(false);
        return DistVector::allocate(region, layout, ((blocks + per - 1) / per) * layout.system_row_bytes(false));
    };
    constexpr std::uint64_t epb = Reference<T>::epb;
    std::normal_distribution<double> normal;
    for (int s = 0; s < shapes; ++s) {
        const std::uint32_t ch = rng() % 2, rk = rng() % 2;
        const std::uint64_t n = 1 + rng() % 3000;
        const std::uint64_t blocks = (n + epb - 1) / epb;
        const std::uint32_t rows = 1 + rng() % 12;
        const std::uint64_t gemv_n = 1 + rng() % (epb * 16);
        const std::uint64_t gkb = (gemv_n + epb - 1) / epb;
        BackingStore mem;
        std::vector<std::shared_ptr<DistVector>> v;
        for (int i = 0; i < 4; ++i) v.push_back(vec(std::max<std::uint64_t>(blocks, gkb * rows) + 4));
        const std::uint64_t off = rng() % 4;
        // Random contents for every operand region used below.
        std::vector<std::vector<T>> data(4, std::vector<T>(std::max<std::uint64_t>(n, gkb * rows * epb)));
        for (int i = 0; i < 4; ++i) {
            for (std::uint64_t e = 0; e < data[i].size(); ++e) {
                data[i][e] = static_cast<T>(normal(rng));
                mem.store<T>(v[i]->block_paddr(ch, rk, off + e / epb) + (e % epb) * sizeof(T), data[i][e]);
            }
        }
        auto get = [&](int i, std::uint64_t e) { return mem.load<T>(v[i]->block_paddr(ch, rk, off + e / epb) + (e % epb) * sizeof(T)); };
        const T a = static_cast<T>(normal(rng)), b = static_cast<T>(normal(rng)), c = static_cast<T>(normal(rng));

        for (Opcode op : kAllOpcodes) {
            BackingStore m2 = mem;
            NdaInstruction in;
            in.op = op;
            in.type = sizeof(T) == 4 ? ElemType::F32 : ElemType::F64;
            in.channel = ch;
            in.rank = rk;
            in.alpha = a;
            in.beta = b;
            in.gamma = c;
            in.n = op == Opcode::GEMV ? gemv_n : n;
            in.rows = op == Opcode::GEMV ? rows : 0;
            for (std::uint32_t i = 0; i < operand_count(op); ++i) in.operands[i] = local_extent(v[i], ch, rk, off);
            validate_instruction(in, mapper);
            std::swap(mem, m2);
            const LanePartials parts = execute_functional(in, mem);
            std::swap(mem, m2);
            auto out = [&](int i, std::uint64_t e) { return m2.load<T>(v[i]->block_paddr(ch, rk, off + e / epb) + (e % epb) * sizeof(T)); };
            const std::string tag = std::string(to_string(op)) + (sizeof(T) == 4 ? "/f32" : "/f64") + " n=" + std::to_string(in.n);

            auto exact = [&](int i, std::uint64_t e, T expect) -> bool {
                ++*compared;
                const T got = out(i, e);
                return std::memcmp(&got, &expect, sizeof(T)) == 0;
            };
            bool ok = true;
            switch (op) {
                case Opcode::AXPBY:
                    for (std::uint64_t e = 0; e < n && ok; ++e) ok = exact(2, e, std::fma(a, get(0, e), b * get(1, e)));
                    break;
                case Opcode::AXPBYPCZ:
                    for (std::uint64_t e = 0; e < n && ok; ++e)
                        ok = exact(3, e, std::fma(a, get(0, e), std::fma(b, get(1, e), c * get(2, e))));
                    break;
                case Opcode::AXPY:  // y = a*y + x
                    for (std::uint64_t e = 0; e < n && ok; ++e) ok = exact(1, e, std::fma(a, get(1, e), get(0, e)));
                    break;
                case Opcode::COPY:
                    for (std::uint64_t e = 0; e < n && ok; ++e) ok = exact(1, e, get(0, e));
                    break;
                case Opcode::XMY:
                    for (std::uint64_t e = 0; e < n && ok; ++e) ok = exact(2, e, get(0, e) * get(1, e));
                    break;
                case Opcode::SCAL:
                    for (std::uint64_t e = 0; e < n && ok; ++e) ok = exact(0, e, a * get(0, e));
                    break;
                case Opcode::DOT:
                case Opcode::NRM2: {
                    std::vector<T> acc(16, T(0));
                    for (std::uint64_t e = 0; e < n; ++e) {
                        const T x = get(0, e), y = op == Opcode::DOT ? get(1, e) : x;
                        acc[Reference<T>::slot(e)] = std::fma(x, y, acc[Reference<T>::slot(e)]);
                    }
                    double ref = 0.0, got = 0.0;
                    for (auto x : acc) ref += x;
                    for (auto x : parts) got += x;
                    if (op == Opcode::NRM2) ref = std::sqrt(ref), got = std::sqrt(got);
                    ++*compared;
                    ok = std::abs(got - ref) <= kReductionRelTol * std::max(1e-300, std::abs(ref));
                    break;
                }
                case Opcode::GEMV: {
                    for (std::uint32_t r = 0; r < rows && ok; ++r) {
                        std::vector<T> acc(16, T(0));
                        for (std::uint64_t e = 0; e < gemv_n; ++e) {
                            acc[Reference<T>::slot(e)] = std::fma(get(0, r * gkb * epb + e), get(1, e), acc[Reference<T>::slot(e)]);
                        }
                        double ref = 0.0, got = 0.0;
                        for (auto x : acc) ref += x;
                        for (std::size_t k = 0; k < 16; ++k) got += parts.at(r * 16 + k);
                        ++*compared;
                        ok = std::abs(got - ref) <= kReductionRelTol * std::max(1e-300, std::abs(ref));
                        // y holds the same partials: lane l of chip c at block 2r+l, word c.
                        for (std::size_t k = 0; k < 16 && ok; ++k) {
                            const PhysicalAddress blk = v[2]->block_paddr(ch, rk, off + 2 * r + k % 2);
                            const T w = m2.load<T>(blk + (k / 2) * kChipBytesPerBurst);
                            ok = std::memcmp(&w, &acc[k], sizeof(T)) == 0;
                        }
                    }
                    break;
                }
            }
            if (!ok) return {false, tag + " mismatch"};
        }
    }
    return {true, ""};
}

Outcome c4_kernels() {
    std::mt19937_64 rng(44);
    std::uint64_t compared = 0;
    for (auto r : {c4_type<float>(rng, 50, &compared), c4_type<double>(rng, 50, &compared)}) {
        if (!r.pass) return r;
    }
    return {true, "9 ops x 100 random shapes, " + std::to_string(compared) + " values compared"};
}

// ---------------------------------------------------------------------------
// C5..C9: bandwidth experiments (paired seeds, default geometry)

Outcome c5_bank_partitioning() {
    const std::string base = std::string("kernel.op=DOT\nnda.next_rank_hint=true\n") + kHighTraffic;
    const auto shared = simulate(base + "map.mode=baseline\n");
    const auto part = simulate(base + "map.mode=partitioned\n");
    const double ratio = part.nda_bytes_per_cycle / shared.nda_bytes_per_cycle;
    return {ratio >= kBankPartitionMinRatio, "DOT shared " + fmt(shared.nda_bytes_per_cycle) + " B/cyc, partitioned " +
                                                 fmt(part.nda_bytes_per_cycle) + " B/cyc, ratio " + fmt(ratio, 2) +
                                                 " (need >= " + fmt(kBankPartitionMinRatio, 2) + ")"};
}

Outcome c6_write_throttling() {
    const std::string base = std::string("kernel.op=COPY\nmap.mode=partitioned\n") + kModerateTraffic;
    const std::vector<std::pair<std::string, std::string>> ps{{"1", "1"}, {"1/4", "0.25"}, {"1/16", "0.0625"}, {"0", "0"}};
    std::vector<StatsReport> r;
    std::ostringstream d;
    for (const auto& [name, p] : ps) {
        r.push_back(simulate(base + "nda.stochastic=true\nnda.write_probability=" + p + "\n"));
        d << "p=" << name << ": lat " << fmt(r.back().avg_read_latency, 1) << " ndaW "
          << fmt(r.back().nda_write_bursts * double(kBlockBytes) / r.back().cycles, 2) << "; ";
    }
    const auto hint = simulate(base + "nda.next_rank_hint=true\n");
    d << "hint: lat " << fmt(hint.avg_read_latency, 1) << " ndaW " << fmt(hint.nda_write_bursts * double(kBlockBytes) / hint.cycles, 2);

    bool lat_mono = true, nda_mono = true;
    for (std::size_t i = 1; i < r.size(); ++i) {
        lat_mono = lat_mono && r[i].avg_read_latency <= r[i - 1].avg_read_latency;
        nda_mono = nda_mono && r[i].nda_write_bursts <= r[i - 1].nda_write_bursts;
    }
    const double lat_q = r[1].avg_read_latency, nda_16 = double(r[2].nda_write_bursts);
    const bool hint_lat = hint.avg_read_latency <= lat_q;
    const bool hint_nda = double(hint.nda_write_bursts) >= nda_16;
    const bool slack = hint.avg_read_latency <= (1.0 - kThrottleSlack) * lat_q ||
                       double(hint.nda_write_bursts) >= (1.0 + kThrottleSlack) * nda_16;
    d << " | latency monotone " << (lat_mono ? "yes" : "NO") << ", NDA writes monotone " << (nda_mono ? "yes" : "NO")
      << ", hint dominates " << (hint_lat && hint_nda && slack ? "yes" : "NO");
    return {lat_mono && nda_mono && hint_lat && hint_nda && slack, d.str()};
}

Outcome c7_coarse_grain() {
    const std::string base = std::string("kernel.op=NRM2\nmap.mode=partitioned\nnda.next_rank_hint=true\n") + kHighTraffic;
    std::vector<double> bw;
    std::ostringstream d;
    for (int n : {1, 8, 64, 512}) {
        bw.push_back(simulate(base + "kernel.blocks=" + std::to_string(n) + "\n").nda_bytes_per_cycle);
        d << "N=" << n << ": " << fmt(bw.back(), 2) << " B/cyc; ";
    }
    bool mono = true;
    for (std::size_t i = 1; i < bw.size(); ++i) mono = mono && bw[i] >= bw[i - 1];
    const double ratio = bw.back() / bw.front();
    d << "N=512/N=1 " << fmt(ratio, 2);
    return {mono && ratio >= kCoarseGrainMinRatio, d.str()};
}

Outcome c8_idle_bandwidth() {
    const SimConfig def = make_config("");
    const double ceiling = double(kBlockBytes) / def.timing.tBL * def.geometry.channels * def.geometry.ranks;
    // Unpartitioned mapping: the NDA may spread its operands over every bank.
    const auto idle = simulate("kernel.op=COPY\nmap.mode=baseline\ntraffic.rate=0\n");
    const auto low = simulate(std::string("kernel.op=COPY\nmap.mode=baseline\nnda.next_rank_hint=true\n") + kLowTraffic);
    // Reported for reference: one reserved bank per rank serializes the operands.
    const auto one_bank = simulate("kernel.op=COPY\nmap.mode=partitioned\ntraffic.rate=0\n");
    const double share0 = idle.nda_bytes_per_cycle / ceiling;
    return {share0 >= kZeroTrafficCeilingShare && low.nda_share_of_idle >= kLowTrafficIdleShare,
            "zero traffic " + fmt(idle.nda_bytes_per_cycle, 2) + "/" + fmt(ceiling, 0) + " B/cyc = " + fmt(100 * share0, 1) +
                "% of ceiling; low traffic " + fmt(100 * low.nda_share_of_idle, 1) +
                "% of measured idle ceiling; partitioned mapping at zero traffic " + fmt(one_bank.nda_bytes_per_cycle, 2) +
                " B/cyc"};
}

Outcome c9_rank_partitioning() {
    bool pass = true;
    std::ostringstream d;
    for (const char* op : {"DOT", "NRM2"}) {
        double shared_bw[2] = {0, 0};
        for (int i = 0; i < 2; ++i) {
            const int ranks = i == 0 ? 2 : 4;
            const std::string base = std::string("kernel.op=") + op + "\nnda.next_rank_hint=true\ngeometry.ranks=" +
                                     std::to_string(ranks) + "\n" + kModerateTraffic;
            const auto shared = simulate(base + "map.mode=partitioned\n");
            const auto dedicated = simulate(base + "sim.rank_partition=true\n");
            shared_bw[i] = shared.nda_bytes_per_cycle;
            const bool win = shared.nda_bytes_per_cycle > dedicated.nda_bytes_per_cycle;
            pass = pass && win;
            d << op << " R=" << ranks << ": shared " << fmt(shared.nda_bytes_per_cycle, 1) << " vs dedicated "
              << fmt(dedicated.nda_bytes_per_cycle, 1) << (win ? "" : " (LOSS)") << "; ";
        }
        const double scale = shared_bw[1] / shared_bw[0];
        pass = pass && scale >= kRankScalingMinRatio;
        d << op << " 4R/2R " << fmt(scale, 2) << "; ";
    }
    return {pass, d.str()};
}

// ---------------------------------------------------------------------------
// C10: SVRG case study

Outcome c10_svrg() {
    const auto t0 = std::chrono::steady_clock::now();
    KeyValueConfig kv = KeyValueConfig::from_string(
        "geometry.ranks=4\nmap.mode=partitioned\nnda.next_rank_hint=true\ntraffic.rate=0\nsim.record_log=false\n");
    SvrgConfig sc = SvrgConfig::from_config(kv);
    const SimConfig cfg = SimConfig::from_config(kv);
    const SvrgDataset ds = SvrgDataset::generate(sc);
    const SvrgOptimum opt = svrg_solve_direct(ds, sc.lambda);
    SvrgConfig tune = sc;
    tune.variant = SvrgVariant::Delayed;
    sc.learning_rate = svrg_tune_learning_rate(tune, ds, opt, {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0});

    std::map<SvrgVariant, SvrgResult> res;
    double max_run = 0;
    for (auto v : {SvrgVariant::HostOnly, SvrgVariant::Serialized, SvrgVariant::Delayed}) {
        SvrgConfig c = sc;
        c.variant = v;
        System sys(cfg);
        const auto r0 = std::chrono::steady_clock::now();
        res[v] = run_svrg(c, &sys, ds, opt);
        max_run = std::max(max_run, std::chrono::duration<double>(std::chrono::steady_clock::now() - r0).count());
    }
    auto ttt = [&](SvrgVariant v) { return res[v].cycles_to_target.value_or(INT64_MAX); };
    const double gap_s = res[SvrgVariant::Serialized].final_loss - opt.loss;
    const double gap_d = res[SvrgVariant::Delayed].final_loss - opt.loss;
    const bool a = std::abs(gap_s) < kSvrgOptimumGap && std::abs(gap_d) < kSvrgOptimumGap;
    const bool b = ttt(SvrgVariant::Delayed) < ttt(SvrgVariant::Serialized);
    const bool c = ttt(SvrgVariant::Serialized) < ttt(SvrgVariant::HostOnly) && ttt(SvrgVariant::Delayed) < ttt(SvrgVariant::HostOnly);
    const bool budget = max_run <= 120.0;
    std::ostringstream d;
    d.precision(3);
    d << "lr " << sc.learning_rate << ", epoch " << sc.epoch << "; gap to optimum S " << gap_s << " D " << gap_d
      << "; cycles to target H " << ttt(SvrgVariant::HostOnly) << " S " << ttt(SvrgVariant::Serialized) << " D "
      << ttt(SvrgVariant::Delayed) << "; (a) " << (a ? "ok" : "FAIL") << " (b) " << (b ? "ok" : "FAIL") << " (c) "
      << (c ? "ok" : "FAIL") << "; slowest run " << std::fixed << max_run << " s, total "
      << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s";
    return {a && b && c && budget, d.str()};
}

// ---------------------------------------------------------------------------
// C11: hand-computed one-kernel energy scenario

Outcome c11_energy(const FuzzSummary* fz) {
    // One 64-block AXPY on (0,0) with no host traffic.
    System sys(make_config("traffic.rate=0\nmap.mode=partitioned\n"));
    Region& region = sys.operand_region(0);
    const std::uint64_t bytes = sys.layout().system_row_bytes(region.is_shared());
    auto x = DistVector::allocate(region, sys.layout(), bytes);
    auto y = DistVector::allocate(region, sys.layout(), bytes);
    NdaInstruction in;
    in.op = Opcode::AXPY;
    in.type = ElemType::F64;
    in.n = 64 * 8;
    in.operands[0] = local_extent(x, 0, 0);
    in.operands[1] = local_extent(y, 0, 0);
    const Ticket t = sys.launch(in);
    sys.run_until(t);
    sys.run_for(100);
    const StatsReport r = sys.report();

    std::uint64_t acts = 0, host = 0, pe = 0;
    for (const auto& c : sys.command_log()) {
        acts += c.kind == CommandKind::ACT;
        if (is_column(c.kind)) (c.source == Source::Host ? host : pe)++;
    }
    const std::uint64_t fmas = 64 * 8;  // one per element
    const auto& geo = sys.config().geometry;
    const double pes = double(geo.channels) * geo.ranks * kChipsPerRank;
    const double seconds = double(sys.now()) / 1.2e9;
    // Energy constants: 1.0 nJ/ACT, 25.7 pJ/bit host, 11.3 pJ/bit PE, 20 pJ/FMA,
    // 20 pJ per buffer access (8 per PE burst), 11 mW + 11 mW leakage per PE.
    const double expect = acts * 1.0 + host * 512 * 25.7e-3 + pe * 512 * 11.3e-3 + fmas * 20e-3 + pe * 8 * 20e-3 +
                          pes * 22e-3 * seconds * 1e9;
    const double rel = std::abs(r.total_nj - expect) / expect;
    std::ostringstream d;
    d.precision(10);
    d << "ACT " << acts << ", host bursts " << host << ", PE bursts " << pe << ", FMA " << fmas << ": expected " << expect
      << " nJ, reported " << r.total_nj << " nJ (rel " << std::scientific << std::setprecision(1) << rel << ")";
    bool pass = rel <= kEnergyRelTol && pe == 3 * 64;  // read x, read y, write y
    if (fz) {
        pass = pass && fz->energy_broken == 0;
        d << "; ledger conservation " << (fz->runs - fz->energy_broken) << "/" << fz->runs << " runs exact";
        if (fz->energy_broken) d << " (" << fz->first_energy << ")";
    }
    return {pass, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    int runs = kFuzzRuns;
    std::set<std::string> only, expected;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--runs" && i + 1 < argc) runs = std::stoi(argv[++i]);
        else if ((a == "--only" || a == "--expect-fail") && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string t; std::getline(ss, t, ',');) (a == "--only" ? only : expected).insert(t);
        } else {
            std::cerr << "usage: ndasim_acceptance [--runs N] [--only C1,C5,...] [--expect-fail C6,...]\n";
            return 2;
        }
    }
    auto want = [&](const char* id) { return only.empty() || only.count(id); };

    int failures = 0, known = 0;
    auto report = [&](const char* id, const char* name, const Outcome& o) {
        std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << name << ": " << o.detail << std::endl;
        if (o.pass) return;
        (expected.count(id) ? known : failures) += 1;
    };
    auto guarded = [&](const char* id, const char* name, const std::function<Outcome()>& f) {
        if (!want(id)) return;
        try {
            report(id, name, f());
        } catch (const std::exception& e) {
            report(id, name, {false, std::string("exception: ") + e.what()});
        }
    };

    std::optional<FuzzSummary> fz;
    if (want("C1") || want("C2") || want("C11")) fz = fuzz(runs);
    if (want("C1")) {
        report("C1", "protocol soundness",
               {fz->audit_dirty == 0 && fz->runs >= kFuzzRuns,
                std::to_string(fz->runs - fz->audit_dirty) + "/" + std::to_string(fz->runs) + " randomized runs of " +
                    std::to_string(kFuzzCycles) + " cycles audit-clean in " + fmt(fz->seconds, 0) + " s" +
                    (fz->audit_dirty ? " (" + fz->first_audit + ")" : "")});
    }
    if (want("C2")) {
        report("C2", "replica equivalence",
               {fz->desynced == 0 && fz->negative_control && fz->runs >= kFuzzRuns,
                std::to_string(fz->runs - fz->desynced) + "/" + std::to_string(fz->runs) + " runs CLEAN" +
                    (fz->desynced ? " (" + fz->first_desync + ")" : "") + "; negative control: " + fz->negative_detail});
    }
    guarded("C3", "mapping correctness", c3_mapping);
    guarded("C4", "functional kernels", c4_kernels);
    guarded("C5", "bank-partitioning benefit", c5_bank_partitioning);
    guarded("C6", "write-throttling tradeoff", c6_write_throttling);
    guarded("C7", "coarse-grain launch", c7_coarse_grain);
    guarded("C8", "idle-bandwidth exploitation", c8_idle_bandwidth);
    guarded("C9", "rank-partitioning comparison", c9_rank_partitioning);
    guarded("C10", "SVRG case study", c10_svrg);
    guarded("C11", "energy accounting", [&] { return c11_energy(fz ? &*fz : nullptr); });
    std::cout << failures + known << " criteria failed";
    if (known) std::cout << " (" << known << " listed with --expect-fail)";
    std::cout << std::endl;
    return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ndasim/errors.hpp"
#include "ndasim/sim_config.hpp"
#include "ndasim/stats.hpp"
#include "ndasim/traffic.hpp"

using namespace ndasim;

TEST_CASE("key=value parsing: comments, overrides, fractions, hex") {
    const auto kv = KeyValueConfig::from_string(
        "# comment\n"
        "a = 1\n"
        "a = 2\n"
        "p = 1/16\n"
        "h = 0x40\n"
        "flag = yes\n"
        "name = hello world\n");
    CHECK(kv.get_int("a", 0) == 2);
    CHECK(kv.get_double("p", 0) == 0.0625);
    CHECK(kv.get_uint("h", 0) == 64);
    CHECK(kv.get_bool("flag", false));
    CHECK(kv.get_string("name", "") == "hello world");
    CHECK(kv.get_int("missing", 7) == 7);
    CHECK_THROWS_AS(kv.get_int("name", 0), ConfigError);
}

TEST_CASE("include splices a file relative to the including file") {
    const auto dir = std::filesystem::temp_directory_path() / "ndasim_cfg_test";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "base.cfg") << "traffic.rate = 0.1\nsim.cycles = 500\n";
    std::ofstream(dir / "top.cfg") << "include base.cfg\nsim.cycles = 900\n";
    const auto kv = KeyValueConfig::from_file(dir / "top.cfg");
    CHECK(kv.get_double("traffic.rate", 0) == 0.1);
    CHECK(kv.get_int("sim.cycles", 0) == 900);
    std::filesystem::remove_all(dir);
}

TEST_CASE("unknown keys are rejected by name") {
    try {
        SimConfig::from_config(KeyValueConfig::from_string("trafic.rate=0.1\n"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "trafic.rate");
    }
}

TEST_CASE("invalid values name the offending field") {
    auto field_of = [](const std::string& text) {
        try {
            SimConfig::from_config(KeyValueConfig::from_string(text));
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("(none)");
    };
    CHECK(field_of("nda.write_probability=1.5\n") == "nda.write_probability");
    CHECK(field_of("traffic.rate=-0.1\n") == "traffic.rate");
    CHECK(field_of("kernel.blocks=0\nkernel.op=COPY\n") == "kernel.blocks");
    CHECK(field_of("traffic.rank_weights=0.5,0.4\n") == "traffic.rank_weights");
}

TEST_CASE("SimConfig text round-trip") {
    const auto a = SimConfig::from_config(KeyValueConfig::from_string(
        "geometry.ranks=4\nmap.mode=partitioned\nmap.reserved_banks=2\nnda.stochastic=true\n"
        "nda.write_probability=0.25\ntraffic.rate=0.07\nkernel.op=DOT\nsim.seed=9\n"));
    std::ostringstream os;
    a.to_config(os);
    const auto b = SimConfig::from_config(KeyValueConfig::from_string(os.str()));
    std::ostringstream os2;
    b.to_config(os2);
    CHECK(os.str() == os2.str());
    CHECK(b.geometry == a.geometry);
    CHECK(b.timing == a.timing);
    CHECK(b.nda.write_probability == 0.25);
    CHECK(b.mapping.reserved_banks == 2);
}

TEST_CASE("trace text round-trip") {
    const std::vector<TraceRecord> t{{0, TxnKind::Read, 0x40}, {17, TxnKind::Write, 0x123440}, {17, TxnKind::Read, 0}};
    std::stringstream ss;
    write_trace(ss, t);
    CHECK(read_trace(ss) == t);
    std::stringstream bad("12,X,0x40\n");
    CHECK_THROWS_AS(read_trace(bad), ConfigError);
}

TEST_CASE("idle histogram buckets gaps by length") {
    IdleHistogram h;
    h.add_gap(5);
    h.add_gap(10);
    h.add_gap(99);
    h.add_gap(250);
    h.add_gap(0);
    CHECK(h.gaps == 4);
    CHECK(h.idle_cycles[0] == 5);
    CHECK(h.idle_cycles[1] == 109);
    CHECK(h.idle_cycles[2] == 0);
    CHECK(h.idle_cycles[3] == 250);
    CHECK(h.total() == 364);
    CHECK(h.fraction(3) == doctest::Approx(250.0 / 364));
}

TEST_CASE("idle histogram from a command log") {
    const Geometry g{1, 1, 4, 2, 64, 16, 8};
    TimingParams tp;
    std::vector<DramCommand> log{{CommandKind::ACT, {0, 0, 0, 1, 0}, Source::Host, 0},
                                 {CommandKind::RD, {0, 0, 0, 1, 0}, Source::Host, 16}};
    const auto h = idle_histogram(log, g, tp, 1000);
    REQUIRE(h.size() == 1);
    // The read's data occupies [16 + tCL, 16 + tCL + tBL).
    CHECK(h[0].total() == 1000 - tp.tBL);
}

TEST_CASE("synthetic traffic is deterministic and honours rate and read mix") {
    const auto cfg = SimConfig::from_config(KeyValueConfig::from_string("traffic.rate=0.2\ntraffic.read_fraction=0.75\n"));
    AddressMapper m(cfg.mapping);
    TrafficGenerator a(cfg.traffic, m), b(cfg.traffic, m);
    std::uint64_t n = 0, reads = 0;
    for (Cycle t = 0; t < 50000; ++t) {
        const auto x = a.next(0, t), y = b.next(0, t);
        REQUIRE(x.has_value() == y.has_value());
        if (!x) continue;
        CHECK(x->paddr == y->paddr);
        CHECK(x->addr.channel == 0);
        ++n;
        reads += x->kind == TxnKind::Read;
    }
    CHECK(double(n) / 50000 == doctest::Approx(0.2).epsilon(0.05));
    CHECK(double(reads) / n == doctest::Approx(0.75).epsilon(0.05));
}

TEST_CASE("partitioned traffic never touches reserved banks") {
    const auto cfg = SimConfig::from_config(
        KeyValueConfig::from_string("traffic.rate=0.5\nmap.mode=partitioned\nmap.reserved_banks=4\n"));
    AddressMapper m(cfg.mapping);
    TrafficGenerator g(cfg.traffic, m);
    for (Cycle t = 0; t < 20000; ++t) {
        for (std::uint32_t ch = 0; ch < 2; ++ch) {
            if (auto x = g.next(ch, t)) {
                CHECK_FALSE(m.is_reserved_bank(x->addr.bank));
                CHECK(x->addr.channel == ch);
            }
        }
    }
}

TEST_CASE("compare_runs computes ratios against the baseline and rejects mismatched pairs") {
    StatsReport base, better;
    base.cycles = better.cycles = 1000;
    base.seed = better.seed = 3;
    base.channels = better.channels = 2;
    base.ranks = better.ranks = 4;
    base.nda_bytes_per_cycle = 10;
    better.nda_bytes_per_cycle = 25;
    base.avg_read_latency = 50;
    better.avg_read_latency = 40;
    base.total_nj = 100;
    better.total_nj = 80;
    const auto rows = compare_runs({{"base", base}, {"new", better}}, "base");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].nda_ratio == 1.0);
    CHECK(rows[1].nda_ratio == 2.5);
    CHECK(rows[1].latency_ratio == 0.8);
    CHECK(rows[1].energy_ratio == 0.8);
    std::ostringstream os;
    write_comparison_csv(os, rows);
    CHECK(os.str().find("new,") != std::string::npos);

    StatsReport other = better;
    other.seed = 4;
    CHECK_THROWS_AS(compare_runs({{"base", base}, {"x", other}}, "base"), MismatchedPairing);
    CHECK_THROWS_AS(compare_runs({{"a", base}}, "missing"), MismatchedPairing);
}

TEST_CASE("report serialization keeps columns aligned") {
    StatsReport r;
    r.cycles = 10;
    const std::string h = csv_header(), row = csv_row("x", r);
    CHECK(std::count(h.begin(), h.end(), ',') == std::count(row.begin(), row.end(), ','));
    CHECK(to_json(r).find("\"cycles\": 10") != std::string::npos);
}

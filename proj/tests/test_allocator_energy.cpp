#include <doctest.h>

#include <cmath>

#include "ndasim/allocator.hpp"
#include "ndasim/energy.hpp"
#include "ndasim/errors.hpp"
#include "ndasim/layout.hpp"

using namespace ndasim;

TEST_CASE("host region rows all carry the requested color") {
    AddressMapper m(MappingConfig::make_default(Geometry{1, 2, 4, 2, 64, 16, 8}));
    for (std::uint32_t c = 0; c < m.color_count(); ++c) {
        Region r = Region::host(m, c);
        CHECK(r.total_rows() > 0);
        for (const auto& range : r.allocate(r.system_row_bytes() * r.total_rows())) {
            for (PhysicalAddress p = range.base; p < range.base + range.bytes; p += r.system_row_bytes()) CHECK(m.color_of(p) == c);
        }
        CHECK(r.free_rows() == 0);
    }
    CHECK_THROWS_AS(Region::host(m, m.color_count()), OutOfRange);
}

TEST_CASE("allocation is first-fit in whole rows and release makes rows reusable") {
    AddressMapper m(MappingConfig::make_default(Geometry{1, 1, 4, 2, 64, 16, 8}));
    Region r = Region::host(m, 0);
    const auto total = r.total_rows();
    const auto a = r.allocate(1);  // rounds up to one row
    CHECK(r.free_rows() == total - 1);
    const auto b = r.allocate(2 * r.system_row_bytes());
    CHECK(r.free_rows() == total - 3);
    r.release(a);
    CHECK(r.free_rows() == total - 2);
    const auto c = r.allocate(r.system_row_bytes());
    CHECK(c.front().base == a.front().base);
    CHECK_THROWS_AS(r.allocate(r.system_row_bytes() * (total + 1)), OutOfColorCapacity);
    (void)b;
}

TEST_CASE("shared region lives in the reserved banks and needs a partitioned mapping") {
    const Geometry g{1, 1, 4, 2, 64, 16, 8};
    CHECK_THROWS_AS(Region::shared(AddressMapper(MappingConfig::make_default(g))), ConfigError);
    AddressMapper m(MappingConfig::make_default(g, MappingMode::Partitioned, 1));
    Region s = Region::shared(m);
    CHECK(s.is_shared());
    for (const auto& range : s.allocate(s.system_row_bytes() * s.total_rows())) {
        for (PhysicalAddress p = range.base; p < range.base + range.bytes; p += kBlockBytes) CHECK(m.is_reserved_bank(m.map(p).bank));
    }
}

TEST_CASE("distributed vector blocks stay on their rank and color") {
    AddressMapper m(MappingConfig::make_default(Geometry{}));
    NdaLayout layout(m);
    Region r = Region::host(m, 3);
    auto v = DistVector::allocate(r, layout, 2 * layout.system_row_bytes(false));
    for (std::uint32_t ch = 0; ch < 2; ++ch) {
        for (std::uint32_t rk = 0; rk < 2; ++rk) {
            for (std::uint64_t b = 0; b < v->local_blocks(); ++b) {
                const auto p = v->block_paddr(ch, rk, b);
                const auto a = m.map(p);
                CHECK(a.channel == ch);
                CHECK(a.rank == rk);
                CHECK(m.color_of(p) == 3);
            }
        }
    }
    CHECK_THROWS_AS(v->block_paddr(0, 0, v->local_blocks()), BoundsViolation);
}

TEST_CASE("backing store reads untouched memory as zero and keeps typed values") {
    BackingStore s;
    CHECK(s.load<double>(0x1000) == 0.0);
    s.store<float>(0x1004, 2.5f);
    s.store<double>(0x1008, -1.25);
    CHECK(s.load<float>(0x1004) == 2.5f);
    CHECK(s.load<double>(0x1008) == -1.25);
    CHECK(s.load<float>(0x1000) == 0.0f);
}

TEST_CASE("energy ledger sums integer femtojoules exactly") {
    EnergyLedger e({}, 8);
    CHECK(e.unit_fj(EnergyEvent::Act) == 1'000'000);
    CHECK(e.unit_fj(EnergyEvent::HostBurst) == 512 * 25'700);
    CHECK(e.unit_fj(EnergyEvent::PeBurst) == 512 * 11'300);
    CHECK(e.unit_fj(EnergyEvent::Fma) == 20'000);
    e.add(EnergyEvent::Act, 3);
    e.add(EnergyEvent::PeBurst, 10);
    energy_account(e, EnergyEvent::Fma, 7);
    CHECK(e.event_fj() == 3'000'000 + 10 * 512 * 11'300 + 7 * 20'000);
    CHECK(e.leakage_nj() == 0.0);
    CHECK(e.average_power_mw() == 0.0);
}

TEST_CASE("leakage is proportional to elapsed time and PE count") {
    EnergyLedger e({}, 16);
    e.set_elapsed(1'200'000);  // one millisecond at 1.2 GHz
    // 22 mW per PE for 1 ms is 22 uJ per PE.
    CHECK(e.leakage_nj() == doctest::Approx(16 * 22e3));
    CHECK(e.average_power_mw() == doctest::Approx(16 * 22.0));
    EnergyParams bad;
    bad.clock_ghz = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "ndasim/errors.hpp"
#include "ndasim/system.hpp"

using namespace ndasim;

namespace {

SimConfig quiet_config(const std::string& extra = "") {
    return SimConfig::from_config(KeyValueConfig::from_string("traffic.rate=0\n" + extra));
}

struct Fixture {
    SimConfig cfg = quiet_config();
    AddressMapper mapper{cfg.mapping};
    NdaLayout layout{mapper};
    Region region = Region::host(mapper, 0);
    BackingStore mem;

    std::shared_ptr<DistVector> vec(std::uint64_t rows = 1) {
        return DistVector::allocate(region, layout, rows * layout.system_row_bytes(false));
    }
    void fill(const std::shared_ptr<DistVector>& v, std::uint64_t n, double (*f)(std::uint64_t)) {
        for (std::uint64_t e = 0; e < n; ++e) mem.store<double>(v->block_paddr(0, 0, e / 8) + (e % 8) * 8, f(e));
    }
    double at(const std::shared_ptr<DistVector>& v, std::uint64_t e) { return mem.load<double>(v->block_paddr(0, 0, e / 8) + (e % 8) * 8); }
};

NdaInstruction make(Opcode op, std::uint64_t n, std::vector<std::shared_ptr<DistVector>> v) {
    NdaInstruction in;
    in.op = op;
    in.n = n;
    for (std::size_t i = 0; i < v.size(); ++i) in.operands[i] = local_extent(v[i], 0, 0);
    return in;
}

}  // namespace

TEST_CASE("operand counts and output roles follow the opcode table") {
    CHECK(operand_count(Opcode::AXPBYPCZ) == 4);
    CHECK(operand_count(Opcode::GEMV) == 3);
    CHECK(operand_count(Opcode::NRM2) == 1);
    CHECK(*output_operand(Opcode::AXPY) == 1);
    CHECK(*output_operand(Opcode::SCAL) == 0);
    CHECK_FALSE(output_operand(Opcode::DOT).has_value());
    for (Opcode op : kAllOpcodes) CHECK(parse_opcode(to_string(op)) == op);
    CHECK_THROWS_AS(parse_opcode("SAXPY"), ConfigError);
}

TEST_CASE("AXPY scales the destination and adds the source") {
    Fixture f;
    auto x = f.vec(), y = f.vec();
    f.fill(x, 16, [](std::uint64_t e) { return double(e); });
    f.fill(y, 16, [](std::uint64_t) { return 2.0; });
    auto in = make(Opcode::AXPY, 16, {x, y});
    in.alpha = 3.0;
    execute_functional(in, f.mem);
    for (std::uint64_t e = 0; e < 16; ++e) CHECK(f.at(y, e) == 6.0 + double(e));
}

TEST_CASE("DOT lane partials sum to the dot product") {
    Fixture f;
    auto x = f.vec(), y = f.vec();
    f.fill(x, 100, [](std::uint64_t e) { return double(e % 7); });
    f.fill(y, 100, [](std::uint64_t e) { return double(e % 3) - 1.0; });
    const auto parts = execute_functional(make(Opcode::DOT, 100, {x, y}), f.mem);
    REQUIRE(parts.size() == kChipsPerRank * kLanesPerChip);
    double sum = 0, ref = 0;
    for (double p : parts) sum += p;
    for (std::uint64_t e = 0; e < 100; ++e) ref += double(e % 7) * (double(e % 3) - 1.0);
    CHECK(sum == ref);
    // Element 0 of block 0 belongs to chip 0 lane 0; element 1 of an f64 block to chip 1.
    f.fill(x, 100, [](std::uint64_t e) { return e == 1 ? 1.0 : 0.0; });
    f.fill(y, 100, [](std::uint64_t) { return 1.0; });
    const auto one = execute_functional(make(Opcode::DOT, 100, {x, y}), f.mem);
    CHECK(one[1 * kLanesPerChip + 0] == 1.0);
}

TEST_CASE("GEMV writes two partial blocks per row") {
    Fixture f;
    auto a = f.vec(), x = f.vec(), y = f.vec();
    f.fill(a, 3 * 16, [](std::uint64_t e) { return double(e / 16 + 1); });  // row r is all r+1
    f.fill(x, 16, [](std::uint64_t) { return 0.5; });
    auto in = make(Opcode::GEMV, 16, {a, x, y});
    in.rows = 3;
    const auto parts = execute_functional(in, f.mem);
    REQUIRE(parts.size() == 3 * 16);
    for (std::uint32_t r = 0; r < 3; ++r) {
        double row = 0;
        for (int k = 0; k < 16; ++k) row += parts[r * 16 + k];
        CHECK(row == doctest::Approx(8.0 * (r + 1)));
        double stored = 0;
        for (int k = 0; k < 16; ++k) stored += f.at(y, 2 * r * 8 + k);
        CHECK(stored == doctest::Approx(row));
    }
}

TEST_CASE("validation rejects operands on another rank and extents past the end") {
    Fixture f;
    auto x = f.vec(), y = f.vec();
    auto in = make(Opcode::COPY, 8, {x, y});
    in.operands[1] = local_extent(y, 1, 0);
    CHECK_THROWS_AS(validate_instruction(in, f.mapper), LocalityViolation);
    auto far = make(Opcode::COPY, 8 * (x->local_blocks() + 1), {x, y});
    CHECK_THROWS_AS(validate_instruction(far, f.mapper), BoundsViolation);
}

TEST_CASE("resident operands generate no DRAM traffic") {
    auto bursts = [](bool resident) {
        System sys(quiet_config());
        Region& region = sys.operand_region(0);
        const auto bytes = sys.layout().system_row_bytes(region.is_shared());
        auto x = DistVector::allocate(region, sys.layout(), bytes);
        auto y = DistVector::allocate(region, sys.layout(), bytes);
        NdaInstruction in;
        in.op = Opcode::DOT;
        in.n = 32 * 8;
        in.operands[0] = local_extent(x, 0, 0, 0, resident);
        in.operands[1] = local_extent(y, 0, 0);
        sys.run_until(sys.launch(in));
        return sys.report().nda_bursts;
    };
    CHECK(bursts(false) == 64);
    CHECK(bursts(true) == 32);
}

TEST_CASE("fma counts per element") {
    NdaInstruction in;
    in.n = 10;
    in.op = Opcode::AXPBYPCZ;
    CHECK(fma_count(in) == 30);
    in.op = Opcode::COPY;
    CHECK(fma_count(in) == 0);
    in.op = Opcode::GEMV;
    in.rows = 4;
    CHECK(fma_count(in) == 40);
}

#include <sstream>

#include "doctest.h"
#include "ndasim/audit.hpp"

using namespace ndasim;

namespace {

DramCommand at(Cycle c, CommandKind k, std::uint32_t rank, std::uint32_t bank, std::uint32_t row = 0,
               std::uint32_t col = 0, Source s = Source::Host) {
    return DramCommand{k, DramAddress{0, rank, bank, row, col}, s, c};
}

}  // namespace

TEST_CASE("empty log is clean") {
    std::vector<DramCommand> log;
    CHECK(audit_log(log, TimingParams{}).empty());
}

TEST_CASE("two ACTs to one bank 54 cycles apart violate tRC by one") {
    const std::vector<DramCommand> log{
        at(0, CommandKind::ACT, 0, 4, 1),
        at(39, CommandKind::PRE, 0, 4),
        at(54, CommandKind::ACT, 0, 4, 2),
    };
    const auto v = audit_log(log, TimingParams{});
    bool found = false;
    for (const auto& x : v) {
        if (x.rule == "tRC") {
            CHECK(x.deficit == 1);
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("audit flags structural and bus problems") {
    SUBCASE("column to closed bank") {
        const std::vector<DramCommand> log{at(5, CommandKind::RD, 0, 0)};
        const auto v = audit_log(log, TimingParams{});
        REQUIRE(v.size() == 1);
        CHECK(v[0].rule == "column-to-closed-bank");
    }
    SUBCASE("unsorted") {
        const std::vector<DramCommand> log{at(10, CommandKind::ACT, 0, 0), at(5, CommandKind::ACT, 1, 0)};
        const auto v = audit_log(log, TimingParams{});
        REQUIRE_FALSE(v.empty());
        CHECK(v[0].rule == "unsorted-log");
    }
    SUBCASE("two host commands in one cycle") {
        const std::vector<DramCommand> log{at(0, CommandKind::ACT, 0, 0), at(0, CommandKind::ACT, 1, 0)};
        const auto v = audit_log(log, TimingParams{});
        REQUIRE(v.size() == 1);
        CHECK(v[0].rule == "ca-bus");
    }
    SUBCASE("rank switch without tRTRS") {
        const std::vector<DramCommand> log{
            at(0, CommandKind::ACT, 0, 0, 1), at(1, CommandKind::ACT, 1, 0, 1),
            at(20, CommandKind::RD, 0, 0, 1), at(24, CommandKind::RD, 1, 0, 1)};
        const auto v = audit_log(log, TimingParams{});
        REQUIRE(v.size() == 1);
        CHECK(v[0].rule == "tRTRS");
        CHECK(v[0].deficit == 2);
    }
    SUBCASE("out-of-geometry command") {
        const std::vector<DramCommand> log{at(0, CommandKind::ACT, 7, 0)};
        CHECK(audit_log(log, TimingParams{})[0].rule == "malformed");
    }
}

TEST_CASE("fifth ACT inside the four-activate window is reported") {
    std::vector<DramCommand> log;
    const std::uint32_t banks[] = {0, 8, 1, 9, 2};
    const Cycle times[] = {0, 4, 8, 12, 16};
    for (int i = 0; i < 5; ++i) log.push_back(at(times[i], CommandKind::ACT, 0, banks[i], 0, 0, Source::Nda));
    const auto v = audit_log(log, TimingParams{});
    REQUIRE(v.size() == 1);
    CHECK(v[0].rule == "tFAW");
    CHECK(v[0].deficit == 10);
}

TEST_CASE("command log text round-trips") {
    const std::vector<DramCommand> log{at(3, CommandKind::ACT, 1, 2, 77), at(20, CommandKind::WR, 1, 2, 77, 5, Source::Nda)};
    std::stringstream ss;
    write_command_log(ss, log);
    CHECK(ss.str() == "3,H,ACT,0,1,2,77,0\n20,N,WR,0,1,2,77,5\n");
    CHECK(read_command_log(ss) == log);
}

#include <benchmark/benchmark.h>

#include <random>

#include "ndasim/audit.hpp"
#include "ndasim/system.hpp"

using namespace ndasim;

namespace {

SimConfig config(const std::string& text) { return SimConfig::from_config(KeyValueConfig::from_string(text)); }

// Simulated cycles per second of wall time; arg 0 toggles the replicas.
void BM_SystemStep(benchmark::State& state) {
    const bool replicas = state.range(0) != 0;
    for (auto _ : state) {
        state.PauseTiming();
        System sys(config(std::string("traffic.rate=0.05\nkernel.op=COPY\nmap.mode=partitioned\nsim.cycles=20000\n"
                                      "sim.record_log=false\nsim.check_replicas=") +
                          (replicas ? "true" : "false") + "\n"));
        state.ResumeTiming();
        benchmark::DoNotOptimize(sys.run());
    }
    state.SetItemsProcessed(state.iterations() * 20000);
}
BENCHMARK(BM_SystemStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MapUnmap(benchmark::State& state) {
    AddressMapper m(MappingConfig::make_default(Geometry{}, MappingMode::Partitioned, 1));
    std::mt19937_64 rng(1);
    std::vector<PhysicalAddress> addrs(4096);
    for (auto& a : addrs) a = (rng() % m.capacity()) & ~std::uint64_t{63};
    std::size_t i = 0;
    for (auto _ : state) {
        const auto d = m.map(addrs[i++ & 4095]);
        benchmark::DoNotOptimize(m.unmap(d));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MapUnmap);

void BM_AuditLog(benchmark::State& state) {
    System sys(config("traffic.rate=0.1\nkernel.op=COPY\nsim.cycles=50000\n"));
    sys.run();
    const auto& log = sys.command_log();
    for (auto _ : state) benchmark::DoNotOptimize(audit_log(log, sys.config().timing, sys.config().geometry));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(log.size()));
}
BENCHMARK(BM_AuditLog)->Unit(benchmark::kMillisecond);

void BM_FunctionalDot(benchmark::State& state) {
    const auto cfg = config("");
    AddressMapper mapper(cfg.mapping);
    NdaLayout layout(mapper);
    Region region = Region::host(mapper, 0);
    auto x = DistVector::allocate(region, layout, 4 * layout.system_row_bytes(false));
    auto y = DistVector::allocate(region, layout, 4 * layout.system_row_bytes(false));
    BackingStore mem;
    NdaInstruction in;
    in.op = Opcode::DOT;
    in.n = static_cast<std::uint64_t>(state.range(0)) * 8;
    in.operands[0] = local_extent(x, 0, 0);
    in.operands[1] = local_extent(y, 0, 0);
    for (auto _ : state) benchmark::DoNotOptimize(execute_functional(in, mem));
    state.SetBytesProcessed(state.iterations() * state.range(0) * 2 * kBlockBytes);
}
BENCHMARK(BM_FunctionalDot)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();

#include "ndasim/sim_config.hpp"

#include <ostream>

#include "ndasim/errors.hpp"

namespace ndasim {

Geometry geometry_from_config(const KeyValueConfig& kv) {
    Geometry g;
    auto u32 = [&](const char* key, std::uint32_t def) {
        return static_cast<std::uint32_t>(kv.get_uint(std::string("geometry.") + key, def));
    };
    g.channels = u32("channels", g.channels);
    g.ranks = u32("ranks", g.ranks);
    g.banks = u32("banks", g.banks);
    g.bank_groups = u32("bank_groups", g.bank_groups);
    g.rows = u32("rows", g.rows);
    g.columns = u32("columns", g.columns);
    g.chips = u32("chips", g.chips);
    return g;
}

TimingParams timing_from_config(const KeyValueConfig& kv) {
    TimingParams t;
    auto get = [&](const char* key, int& field) {
        field = static_cast<int>(kv.get_int(std::string("timing.") + key, field));
    };
    get("tBL", t.tBL);
    get("tCCDS", t.tCCDS);
    get("tCCDL", t.tCCDL);
    get("tRTRS", t.tRTRS);
    get("tCL", t.tCL);
    get("tRCD", t.tRCD);
    get("tRP", t.tRP);
    get("tCWL", t.tCWL);
    get("tRAS", t.tRAS);
    get("tRC", t.tRC);
    get("tRTP", t.tRTP);
    get("tWTRS", t.tWTRS);
    get("tWTRL", t.tWTRL);
    get("tWR", t.tWR);
    get("tRRDS", t.tRRDS);
    get("tRRDL", t.tRRDL);
    get("tFAW", t.tFAW);
    t.validate();
    return t;
}

void SimConfig::validate() const {
    timing.validate();
    mapping.validate();
    if (!(mapping.geometry == geometry)) throw ConfigError("geometry", "does not match the mapping dimensions");
    if (geometry.chips != kChipsPerRank) {
        throw ConfigError("geometry.chips", "must be " + std::to_string(kChipsPerRank) + " (8 bytes per chip per burst)");
    }
    if (geometry.banks > 32) throw ConfigError("geometry.banks", "at most 32 banks per rank are supported");
    if (geometry.bank_groups == 0 || geometry.banks % geometry.bank_groups != 0) {
        throw ConfigError("geometry.bank_groups", "must divide the bank count");
    }
    host.validate();
    nda.validate();
    energy.validate();
    traffic.validate(geometry);
    if (cycles < 0) throw ConfigError("sim.cycles", "must be nonnegative");
    if (rank_partition && geometry.ranks < 2) throw ConfigError("sim.rank_partition", "needs at least two ranks");
    if (kernel.enabled) {
        if (kernel.blocks == 0) throw ConfigError("kernel.blocks", "must be positive");
        if (kernel.depth == 0) throw ConfigError("kernel.depth", "must be positive");
    }
    if (table_check_interval <= 0) throw ConfigError("sim.table_check_interval", "must be positive");
}

SimConfig SimConfig::from_config(const KeyValueConfig& kv) {
    SimConfig c;
    c.geometry = geometry_from_config(kv);
    c.timing = timing_from_config(kv);
    c.mapping = MappingConfig::from_config(kv, c.geometry);
    c.host = HostPolicy::from_config(kv);
    c.nda = NdaPolicy::from_config(kv);
    c.energy = EnergyParams::from_config(kv);
    c.seed = kv.get_uint("sim.seed", c.seed);
    c.traffic = TrafficProfile::from_config(kv);
    if (!kv.has("traffic.seed")) c.traffic.seed = c.seed;
    c.trace_path = kv.get_string("trace.path", "");
    c.kernel.enabled = kv.has("kernel.op");
    c.kernel.op = parse_opcode(kv.get_string("kernel.op", "COPY"));
    const auto type = kv.get_string("kernel.type", "f64");
    if (type == "f64") c.kernel.type = ElemType::F64;
    else if (type == "f32") c.kernel.type = ElemType::F32;
    else throw ConfigError("kernel.type", "expected f32 or f64");
    c.kernel.blocks = kv.get_uint("kernel.blocks", c.kernel.blocks);
    c.kernel.depth = static_cast<std::uint32_t>(kv.get_uint("kernel.depth", c.kernel.depth));
    c.kernel.functional = kv.get_bool("kernel.functional", c.kernel.functional);
    c.rank_partition = kv.get_bool("sim.rank_partition", c.rank_partition);
    c.cycles = kv.get_int("sim.cycles", c.cycles);
    c.record_log = kv.get_bool("sim.record_log", c.record_log);
    c.check_replicas = kv.get_bool("sim.check_replicas", c.check_replicas);
    c.table_check_interval = kv.get_int("sim.table_check_interval", c.table_check_interval);
    if (auto unused = kv.unused_keys(); !unused.empty()) throw ConfigError(unused.front(), "unknown key");
    c.validate();
    return c;
}

void SimConfig::to_config(std::ostream& os) const {
    os << "geometry.channels=" << geometry.channels << "\ngeometry.ranks=" << geometry.ranks
       << "\ngeometry.banks=" << geometry.banks << "\ngeometry.bank_groups=" << geometry.bank_groups
       << "\ngeometry.rows=" << geometry.rows << "\ngeometry.columns=" << geometry.columns
       << "\ngeometry.chips=" << geometry.chips << '\n';
    const std::pair<const char*, int> t[] = {
        {"tBL", timing.tBL},   {"tCCDS", timing.tCCDS}, {"tCCDL", timing.tCCDL}, {"tRTRS", timing.tRTRS},
        {"tCL", timing.tCL},   {"tRCD", timing.tRCD},   {"tRP", timing.tRP},     {"tCWL", timing.tCWL},
        {"tRAS", timing.tRAS}, {"tRC", timing.tRC},     {"tRTP", timing.tRTP},   {"tWTRS", timing.tWTRS},
        {"tWTRL", timing.tWTRL}, {"tWR", timing.tWR},   {"tRRDS", timing.tRRDS}, {"tRRDL", timing.tRRDL},
        {"tFAW", timing.tFAW}};
    for (const auto& [k, v] : t) os << "timing." << k << '=' << v << '\n';
    mapping.to_config(os);
    os << "host.read_queue=" << host.read_queue << "\nhost.write_queue=" << host.write_queue
       << "\nhost.drain_high=" << host.drain_high << "\nhost.drain_low=" << host.drain_low
       << "\nhost.starvation_cap=" << host.starvation_cap << "\nhost.nda_yield_age=" << host.nda_yield_age << '\n';
    os << "nda.stochastic=" << (nda.stochastic ? "true" : "false") << "\nnda.write_probability="
       << nda.write_probability << "\nnda.next_rank_hint=" << (nda.next_rank_hint ? "true" : "false")
       << "\nnda.lookahead=" << nda.lookahead << "\nnda.write_phase_enter=" << nda.write_phase_enter << '\n';
    os << "traffic.rate=" << traffic.rate << "\ntraffic.read_fraction=" << traffic.read_fraction
       << "\ntraffic.row_locality=" << traffic.row_locality << "\ntraffic.footprint=" << traffic.footprint
       << "\ntraffic.seed=" << traffic.seed << '\n';
    if (!traffic.rank_weights.empty()) {
        os << "traffic.rank_weights=";
        for (std::size_t i = 0; i < traffic.rank_weights.size(); ++i) os << (i ? "," : "") << traffic.rank_weights[i];
        os << '\n';
    }
    os << "energy.act_nj=" << energy.act_nj << "\nenergy.pe_rw_pj_per_bit=" << energy.pe_rw_pj_per_bit
       << "\nenergy.host_rw_pj_per_bit=" << energy.host_rw_pj_per_bit << "\nenergy.fma_pj=" << energy.fma_pj
       << "\nenergy.buffer_access_pj=" << energy.buffer_access_pj << "\nenergy.buffer_leak_mw=" << energy.buffer_leak_mw
       << "\nenergy.scratch_leak_mw=" << energy.scratch_leak_mw << "\nenergy.clock_ghz=" << energy.clock_ghz << '\n';
    if (!trace_path.empty()) os << "trace.path=" << trace_path << '\n';
    if (kernel.enabled) {
        os << "kernel.op=" << to_string(kernel.op) << "\nkernel.type=" << (kernel.type == ElemType::F64 ? "f64" : "f32")
           << "\nkernel.blocks=" << kernel.blocks << "\nkernel.depth=" << kernel.depth
           << "\nkernel.functional=" << (kernel.functional ? "true" : "false") << '\n';
    }
    os << "sim.rank_partition=" << (rank_partition ? "true" : "false") << "\nsim.cycles=" << cycles
       << "\nsim.seed=" << seed << "\nsim.record_log=" << (record_log ? "true" : "false")
       << "\nsim.check_replicas=" << (check_replicas ? "true" : "false")
       << "\nsim.table_check_interval=" << table_check_interval << '\n';
}

}  // namespace ndasim

#pragma once

#include <iosfwd>
#include <string>

#include "ndasim/dram.hpp"
#include "ndasim/energy.hpp"
#include "ndasim/host_mc.hpp"
#include "ndasim/kvconfig.hpp"
#include "ndasim/mapping.hpp"
#include "ndasim/nda.hpp"
#include "ndasim/nda_fsm.hpp"
#include "ndasim/traffic.hpp"

namespace ndasim {

/// A synthetic NDA workload that keeps every participating rank busy with
/// back-to-back instructions of one opcode.
struct KernelWorkload {
    bool enabled = false;
    Opcode op = Opcode::COPY;
    ElemType type = ElemType::F64;
    std::uint64_t blocks = 512;  // 64B blocks per instruction and rank (GEMV: row blocks x rows)
    std::uint32_t depth = 2;     // instructions in flight per rank
    bool functional = false;     // also compute results in the backing store
};

struct SimConfig {
    Geometry geometry;
    TimingParams timing;
    MappingConfig mapping = MappingConfig::make_default(Geometry{});
    HostPolicy host;
    NdaPolicy nda;
    EnergyParams energy;
    TrafficProfile traffic;
    std::string trace_path;  // replaces synthetic traffic when set
    KernelWorkload kernel;
    /// Baseline that hands the upper half of every channel's ranks to the NDAs
    /// and confines host traffic to the lower half.
    bool rank_partition = false;
    Cycle cycles = 100000;
    std::uint64_t seed = 1;
    bool record_log = true;
    bool check_replicas = true;
    Cycle table_check_interval = 4096;

    /// Throws ConfigError naming the offending key.
    void validate() const;
    /// Reads every section; keys that are present but unknown are rejected.
    static SimConfig from_config(const KeyValueConfig& kv);
    void to_config(std::ostream& os) const;
};

Geometry geometry_from_config(const KeyValueConfig& kv);
TimingParams timing_from_config(const KeyValueConfig& kv);

}  // namespace ndasim

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ndasim/energy.hpp"
#include "ndasim/traffic.hpp"

namespace ndasim {

/// Summary of one run. Host "performance" is reported as average read latency
/// and reads served per kilocycle; there is no CPU model behind it.
struct StatsReport {
    Cycle cycles = 0;
    std::uint32_t channels = 0;
    std::uint32_t ranks = 0;  // total over all channels
    std::uint64_t seed = 0;

    // Command counts indexed by CommandKind.
    std::array<std::uint64_t, 5> host_commands{};
    std::array<std::uint64_t, 5> nda_commands{};

    std::uint64_t host_reads = 0;   // synthetic/trace reads completed
    std::uint64_t host_writes = 0;
    double avg_read_latency = 0.0;  // cycles from enqueue to data return
    Cycle p95_read_latency = 0;
    Cycle max_read_latency = 0;
    double reads_per_kcycle = 0.0;

    double host_bus_utilization = 0.0;  // host data-bus busy fraction per channel
    double nda_bytes_per_cycle = 0.0;   // all ranks together
    std::uint64_t nda_bursts = 0;
    std::uint64_t nda_write_bursts = 0;
    std::uint64_t host_idle_rank_cycles = 0;  // rank-cycles without a host burst
    std::uint64_t ideal_nda_bursts = 0;       // host-idle rank cycles / tBL
    double nda_share_of_idle = 0.0;           // nda_bursts / ideal_nda_bursts

    std::uint64_t rank_turnarounds = 0;  // WR then RD on one rank, any source
    std::uint64_t host_turnarounds = 0;  // host WR then host RD on one channel
    std::uint64_t launch_packets = 0;

    IdleHistogram idle;  // summed over ranks

    std::uint64_t nda_ops_completed = 0;
    double avg_nda_op_latency = 0.0;  // launch call to completion
    Cycle max_nda_op_latency = 0;

    std::array<std::uint64_t, kEnergyEventKinds> energy_counts{};
    std::int64_t event_fj = 0;
    double event_nj = 0.0;
    double leakage_nj = 0.0;
    double total_nj = 0.0;
    double average_power_mw = 0.0;

    bool replicas_clean = true;
    std::string replica_detail;
    std::uint64_t audit_violations = 0;

    bool operator==(const StatsReport&) const = default;
};

std::string to_json(const StatsReport& r);
/// Header line and one data row with the same columns.
std::string csv_header();
std::string csv_row(const std::string& label, const StatsReport& r);

/// Paired comparison: rows of label, metrics and ratios against `baseline`.
struct ComparisonRow {
    std::string label;
    double nda_bytes_per_cycle = 0.0;
    double avg_read_latency = 0.0;
    double total_nj = 0.0;
    double nda_ratio = 1.0;
    double latency_ratio = 1.0;
    double energy_ratio = 1.0;
};

/// Throws MismatchedPairing when runs differ in seed, length or geometry.
std::vector<ComparisonRow> compare_runs(const std::vector<std::pair<std::string, StatsReport>>& reports,
                                        const std::string& baseline);
void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows);

}  // namespace ndasim

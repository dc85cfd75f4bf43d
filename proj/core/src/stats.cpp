#include "ndasim/stats.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "ndasim/errors.hpp"

namespace ndasim {

std::string to_json(const StatsReport& r) {
    nlohmann::ordered_json j;
    j["cycles"] = r.cycles;
    j["channels"] = r.channels;
    j["ranks"] = r.ranks;
    j["seed"] = r.seed;
    const char* kinds[] = {"ACT", "PRE", "PREA", "RD", "WR"};
    for (std::size_t k = 0; k < 5; ++k) {
        j["host_commands"][kinds[k]] = r.host_commands[k];
        j["nda_commands"][kinds[k]] = r.nda_commands[k];
    }
    j["host"] = {{"reads", r.host_reads},
                 {"writes", r.host_writes},
                 {"avg_read_latency", r.avg_read_latency},
                 {"p95_read_latency", r.p95_read_latency},
                 {"max_read_latency", r.max_read_latency},
                 {"reads_per_kcycle", r.reads_per_kcycle},
                 {"bus_utilization", r.host_bus_utilization},
                 {"turnarounds", r.host_turnarounds}};
    j["nda"] = {{"bytes_per_cycle", r.nda_bytes_per_cycle},
                {"bursts", r.nda_bursts},
                {"write_bursts", r.nda_write_bursts},
                {"ideal_bursts", r.ideal_nda_bursts},
                {"share_of_idle", r.nda_share_of_idle},
                {"ops_completed", r.nda_ops_completed},
                {"avg_op_latency", r.avg_nda_op_latency},
                {"max_op_latency", r.max_nda_op_latency},
                {"launch_packets", r.launch_packets}};
    j["rank_turnarounds"] = r.rank_turnarounds;
    j["host_idle_rank_cycles"] = r.host_idle_rank_cycles;
    j["idle_histogram"] = {{"lt10", r.idle.idle_cycles[0]},
                           {"10_100", r.idle.idle_cycles[1]},
                           {"100_250", r.idle.idle_cycles[2]},
                           {"ge250", r.idle.idle_cycles[3]},
                           {"gaps", r.idle.gaps}};
    for (std::size_t e = 0; e < kEnergyEventKinds; ++e) {
        j["energy"]["counts"][std::string(to_string(static_cast<EnergyEvent>(e)))] = r.energy_counts[e];
    }
    j["energy"]["event_fj"] = r.event_fj;
    j["energy"]["event_nj"] = r.event_nj;
    j["energy"]["leakage_nj"] = r.leakage_nj;
    j["energy"]["total_nj"] = r.total_nj;
    j["energy"]["average_power_mw"] = r.average_power_mw;
    j["replicas"] = {{"clean", r.replicas_clean}, {"detail", r.replica_detail}};
    j["audit_violations"] = r.audit_violations;
    return j.dump(2);
}

std::string csv_header() {
    return "label,cycles,seed,host_reads,avg_read_latency,p95_read_latency,reads_per_kcycle,host_bus_utilization,"
           "nda_bytes_per_cycle,nda_bursts,nda_share_of_idle,rank_turnarounds,host_turnarounds,launch_packets,"
           "nda_ops_completed,avg_nda_op_latency,total_nj,average_power_mw,replicas_clean,audit_violations";
}

std::string csv_row(const std::string& label, const StatsReport& r) {
    std::ostringstream os;
    os << std::setprecision(10) << label << ',' << r.cycles << ',' << r.seed << ',' << r.host_reads << ','
       << r.avg_read_latency << ',' << r.p95_read_latency << ',' << r.reads_per_kcycle << ','
       << r.host_bus_utilization << ',' << r.nda_bytes_per_cycle << ',' << r.nda_bursts << ','
       << r.nda_share_of_idle << ',' << r.rank_turnarounds << ',' << r.host_turnarounds << ','
       << r.launch_packets << ',' << r.nda_ops_completed << ',' << r.avg_nda_op_latency << ',' << r.total_nj
       << ',' << r.average_power_mw << ',' << (r.replicas_clean ? 1 : 0) << ',' << r.audit_violations;
    return os.str();
}

std::vector<ComparisonRow> compare_runs(const std::vector<std::pair<std::string, StatsReport>>& reports,
                                        const std::string& baseline) {
    const StatsReport* base = nullptr;
    for (const auto& [label, r] : reports) {
        if (label == baseline) base = &r;
    }
    if (!base) throw MismatchedPairing("baseline '" + baseline + "' is not among the reports");
    auto ratio = [](double a, double b) { return b == 0.0 ? (a == 0.0 ? 1.0 : 0.0) : a / b; };
    std::vector<ComparisonRow> rows;
    for (const auto& [label, r] : reports) {
        if (r.seed != base->seed || r.cycles != base->cycles || r.channels != base->channels) {
            throw MismatchedPairing("run '" + label + "' is not paired with '" + baseline +
                                    "' (seed, length and channel count must match)");
        }
        ComparisonRow row;
        row.label = label;
        row.nda_bytes_per_cycle = r.nda_bytes_per_cycle;
        row.avg_read_latency = r.avg_read_latency;
        row.total_nj = r.total_nj;
        row.nda_ratio = ratio(r.nda_bytes_per_cycle, base->nda_bytes_per_cycle);
        row.latency_ratio = ratio(r.avg_read_latency, base->avg_read_latency);
        row.energy_ratio = ratio(r.total_nj, base->total_nj);
        rows.push_back(row);
    }
    return rows;
}

void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
    os << "label,nda_bytes_per_cycle,avg_read_latency,total_nj,nda_ratio,latency_ratio,energy_ratio\n";
    os << std::setprecision(10);
    for (const auto& r : rows) {
        os << r.label << ',' << r.nda_bytes_per_cycle << ',' << r.avg_read_latency << ',' << r.total_nj << ','
           << r.nda_ratio << ',' << r.latency_ratio << ',' << r.energy_ratio << '\n';
    }
}

}  // namespace ndasim

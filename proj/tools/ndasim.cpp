// ndasim command-line front end.
#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <iostream>
#include <sstream>
#include <thread>

#include "ndasim/audit.hpp"
#include "ndasim/errors.hpp"
#include "ndasim/svrg.hpp"
#include "ndasim/system.hpp"

using namespace ndasim;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> cycles;
    std::string out;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("-c,--config", c.config, "key=value configuration file")->check(CLI::ExistingFile);
    app->add_option("-s,--set", c.sets, "override one key (key=value), repeatable");
    app->add_option("--seed", c.seed, "simulation seed (sim.seed)");
    app->add_option("--cycles", c.cycles, "run length in DRAM cycles (sim.cycles)");
    app->add_option("-o,--out", c.out, "report path (.json or .csv)");
}

KeyValueConfig load(const Common& c, const std::string& defaults = {}) {
    KeyValueConfig kv = KeyValueConfig::from_string(defaults);
    if (!c.config.empty()) kv.merge(KeyValueConfig::from_file(c.config));
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(s, "expected key=value");
        kv.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.seed) kv.set("sim.seed", std::to_string(*c.seed));
    if (c.cycles) kv.set("sim.cycles", std::to_string(*c.cycles));
    return kv;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open " + path + " for writing");
    return f;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void print_summary(std::ostream& os, const std::string& label, const StatsReport& r) {
    os << label << ": cycles=" << r.cycles << " host_reads=" << r.host_reads << " avg_read_latency=" << r.avg_read_latency
       << " nda_B/cycle=" << r.nda_bytes_per_cycle << " nda_share_of_idle=" << r.nda_share_of_idle
       << " energy_nJ=" << r.total_nj << " replicas=" << (r.replicas_clean ? "CLEAN" : r.replica_detail)
       << " audit_violations=" << r.audit_violations << '\n';
}

int cmd_run(const Common& c, const std::string& dump_log) {
    auto kv = load(c);
    const SimConfig cfg = SimConfig::from_config(kv);
    System sys(cfg);
    const StatsReport r = sys.run();
    print_summary(std::cout, "run", r);
    if (!c.out.empty()) {
        auto f = open_out(c.out);
        if (ends_with(c.out, ".csv")) f << csv_header() << '\n' << csv_row("run", r) << '\n';
        else f << to_json(r) << '\n';
    }
    if (!dump_log.empty()) {
        if (!cfg.record_log) throw ConfigError("sim.record_log", "--dump-log needs the command log to be recorded");
        auto f = open_out(dump_log);
        write_command_log(f, sys.command_log());
    }
    return r.replicas_clean && r.audit_violations == 0 ? 0 : 1;
}

// Expands key=v1,v2,... into the cartesian product of overrides.
std::vector<std::vector<std::pair<std::string, std::string>>> cartesian(const std::vector<std::string>& params) {
    std::vector<std::vector<std::pair<std::string, std::string>>> grid{{}};
    for (const auto& p : params) {
        const auto eq = p.find('=');
        if (eq == std::string::npos) throw ConfigError(p, "expected key=v1,v2,...");
        const std::string key = p.substr(0, eq);
        std::vector<std::string> values;
        std::stringstream ss(p.substr(eq + 1));
        for (std::string v; std::getline(ss, v, ',');) values.push_back(v);
        if (values.empty()) throw ConfigError(key, "no values to sweep");
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        for (const auto& g : grid) {
            for (const auto& v : values) {
                auto e = g;
                e.emplace_back(key, v);
                next.push_back(std::move(e));
            }
        }
        grid = std::move(next);
    }
    return grid;
}

int cmd_sweep(const Common& c, const std::vector<std::string>& params, std::string baseline, unsigned jobs) {
    const auto grid = cartesian(params);
    const auto base_kv = load(c);
    std::vector<std::pair<std::string, SimConfig>> runs;
    for (const auto& point : grid) {
        KeyValueConfig kv = base_kv;
        std::string label;
        for (const auto& [k, v] : point) {
            kv.set(k, v);
            label += (label.empty() ? "" : " ") + k + "=" + v;
        }
        runs.emplace_back(label.empty() ? "default" : label, SimConfig::from_config(kv));
    }
    if (baseline.empty()) baseline = runs.front().first;

    // Independent simulations; each owns all of its state.
    std::vector<std::pair<std::string, StatsReport>> reports(runs.size());
    std::size_t next = 0;
    std::mutex m;
    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(m);
                if (next == runs.size()) return;
                i = next++;
            }
            System sys(runs[i].second);
            reports[i] = {runs[i].first, sys.run()};
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::max(1u, jobs); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (const auto& [label, r] : reports) print_summary(std::cout, label, r);
    const auto rows = compare_runs(reports, baseline);
    write_comparison_csv(std::cout, rows);
    if (!c.out.empty()) {
        auto f = open_out(c.out);
        f << csv_header() << '\n';
        for (const auto& [label, r] : reports) f << csv_row(label, r) << '\n';
    }
    return 0;
}

int cmd_audit(const Common& c, const std::string& log_path, std::size_t show) {
    auto kv = load(c);
    const SimConfig cfg = SimConfig::from_config(kv);
    std::ifstream in(log_path);
    if (!in) throw Error("cannot open " + log_path);
    const auto log = read_command_log(in);
    const auto violations = audit_log(log, cfg.timing, cfg.geometry);
    std::cout << log.size() << " commands, " << violations.size() << " violations\n";
    for (std::size_t i = 0; i < std::min(show, violations.size()); ++i) {
        const auto& v = violations[i];
        std::cout << "  " << format_command(v.command) << ": " << v.rule << " short by " << v.deficit << '\n';
    }
    return violations.empty() ? 0 : 1;
}

int cmd_map(const Common& c, const std::vector<std::string>& addrs, const std::string& dram) {
    auto kv = load(c);
    const SimConfig cfg = SimConfig::from_config(kv);
    const AddressMapper m(cfg.mapping);
    std::cout << "capacity=" << m.capacity() << " bytes, colors=" << m.color_count()
              << ", system_row=" << m.system_row_bytes() << " bytes";
    if (cfg.mapping.mode == MappingMode::Partitioned) {
        std::cout << ", host_region=" << m.host_region_bytes() << " bytes, shared_system_row=" << m.shared_system_row_bytes()
                  << " bytes";
    }
    std::cout << "\n";
    cfg.mapping.to_config(std::cout);
    for (const auto& a : addrs) {
        const PhysicalAddress p = std::stoull(a, nullptr, 0);
        const DramAddress d = m.map(p);
        std::cout << a << " -> ch=" << d.channel << " rank=" << d.rank << " bank=" << d.bank << " row=" << d.row
                  << " col=" << d.column << " color=" << m.color_of(p) << (m.in_shared_region(p) ? " shared" : "") << '\n';
    }
    if (!dram.empty()) {
        std::vector<std::uint64_t> f;
        std::stringstream ss(dram);
        for (std::string v; std::getline(ss, v, ',');) f.push_back(std::stoull(v, nullptr, 0));
        if (f.size() != 5) throw ConfigError("--dram", "expected channel,rank,bank,row,column");
        DramAddress d;
        d.channel = static_cast<std::uint32_t>(f[0]);
        d.rank = static_cast<std::uint32_t>(f[1]);
        d.bank = static_cast<std::uint32_t>(f[2]);
        d.row = static_cast<std::uint32_t>(f[3]);
        d.column = static_cast<std::uint32_t>(f[4]);
        std::cout << dram << " -> 0x" << std::hex << m.unmap(d) << std::dec << '\n';
    }
    return 0;
}

// Machine defaults for the case study: eight NDAs, shared reserved banks and
// the next-rank hint.
constexpr const char* kSvrgDefaults =
    "geometry.ranks=4\nmap.mode=partitioned\nnda.next_rank_hint=true\ntraffic.rate=0\n";

int cmd_svrg(const Common& c, const std::string& variant, bool tune, bool epoch_sweep) {
    auto kv = load(c, kSvrgDefaults);
    SvrgConfig sc = SvrgConfig::from_config(kv);
    const SimConfig cfg = SimConfig::from_config(kv);
    const SvrgDataset ds = SvrgDataset::generate(sc);
    const SvrgOptimum opt = svrg_solve_direct(ds, sc.lambda);
    std::cout << "dataset " << ds.samples << "x" << ds.features << "x" << ds.classes << ", optimum loss "
              << std::setprecision(12) << opt.loss << " (" << opt.newton_steps << " Newton steps)\n";
    if (tune) {
        SvrgConfig t = sc;
        t.variant = SvrgVariant::Delayed;
        sc.learning_rate = svrg_tune_learning_rate(t, ds, opt, {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0});
        std::cout << "chosen learning rate " << sc.learning_rate << '\n';
    }
    std::vector<SvrgVariant> variants;
    if (variant == "all") variants = {SvrgVariant::HostOnly, SvrgVariant::Serialized, SvrgVariant::Delayed};
    else variants = {parse_svrg_variant(variant)};
    std::vector<std::uint64_t> epochs{sc.epoch};
    if (epoch_sweep) epochs = {sc.samples, sc.samples / 2, sc.samples / 4, sc.samples / 8};

    std::ofstream csv;
    if (!c.out.empty()) csv = open_out(c.out);
    for (auto e : epochs) {
        for (auto v : variants) {
            SvrgConfig run = sc;
            run.variant = v;
            run.epoch = std::max<std::uint64_t>(1, e);
            System sys(cfg);
            const SvrgResult r = run_svrg(run, &sys, ds, opt);
            std::cout << to_string(v) << " epoch=" << run.epoch << " lr=" << run.learning_rate << " outer=" << r.curve.size() - 1
                      << " final_gap=" << r.final_loss - opt.loss << " cycles_to_target="
                      << (r.cycles_to_target ? std::to_string(*r.cycles_to_target) : "never") << '\n';
            if (csv) {
                csv << "# variant=" << to_string(v) << " epoch=" << run.epoch << " learning_rate=" << run.learning_rate << '\n';
                write_convergence_csv(csv, r);
            }
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ndasim: cycle-level DDR4 simulator with host and near-data accelerators sharing ranks"};
    app.require_subcommand(1);

    Common c;
    std::string dump_log;
    auto* run = app.add_subcommand("run", "run one configuration and report statistics");
    add_common(run, c);
    run->add_option("--dump-log", dump_log, "write the DRAM command log to this file");

    std::vector<std::string> params;
    std::string baseline;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    auto* sweep = app.add_subcommand("sweep", "run the cartesian product of parameter lists");
    add_common(sweep, c);
    sweep->add_option("-p,--param", params, "key=v1,v2,... (repeatable)")->required();
    sweep->add_option("--baseline", baseline, "label of the baseline run (default: first)");
    sweep->add_option("-j,--jobs", jobs, "parallel simulations");

    std::string log_path;
    std::size_t show = 10;
    auto* audit = app.add_subcommand("audit", "check a dumped command log against the DDR4 rules");
    add_common(audit, c);
    audit->add_option("log", log_path, "command log file")->required()->check(CLI::ExistingFile);
    audit->add_option("--show", show, "violations to print");

    std::vector<std::string> addrs;
    std::string dram;
    auto* map = app.add_subcommand("map", "inspect and validate the address mapping");
    add_common(map, c);
    map->add_option("--addr", addrs, "physical address to translate (repeatable)");
    map->add_option("--dram", dram, "channel,rank,bank,row,column to translate back");

    std::string variant = "all";
    bool tune = false, epoch_sweep = false;
    auto* svrg = app.add_subcommand("svrg", "SVRG case study (HOST_ONLY, SERIALIZED, DELAYED)");
    add_common(svrg, c);
    svrg->add_option("--variant", variant, "HOST_ONLY, SERIALIZED, DELAYED or all");
    svrg->add_flag("--tune", tune, "grid-search the learning rate first");
    svrg->add_flag("--epoch-sweep", epoch_sweep, "run epochs N, N/2, N/4 and N/8");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(c, dump_log);
        if (*sweep) return cmd_sweep(c, params, baseline, jobs);
        if (*audit) return cmd_audit(c, log_path, show);
        if (*map) return cmd_map(c, addrs, dram);
        if (*svrg) return cmd_svrg(c, variant, tune, epoch_sweep);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

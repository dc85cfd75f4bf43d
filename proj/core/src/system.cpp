#include "ndasim/system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ndasim/audit.hpp"
#include "ndasim/errors.hpp"
#include "ndasim/kernel_driver.hpp"

namespace ndasim {

namespace {

std::size_t kind_index(CommandKind k) { return static_cast<std::size_t>(k); }

}  // namespace

System::System(const SimConfig& cfg)
    : cfg_(cfg),
      mapper_((cfg.validate(), cfg.mapping)),
      layout_(mapper_),
      ledger_(cfg.energy, cfg.geometry.channels * cfg.geometry.ranks * cfg.geometry.chips) {
    const auto& geo = cfg_.geometry;
    for (std::uint32_t ch = 0; ch < geo.channels; ++ch) {
        truth_.emplace_back(ch, geo, cfg_.timing);
        table_.emplace_back(ch, geo, cfg_.timing);
        mcs_.emplace_back(ch, geo, cfg_.timing, cfg_.host);
        for (std::uint32_t r = 0; r < geo.ranks; ++r) {
            units_.emplace_back(ch, r, mapper_, cfg_.timing, cfg_.nda);
            RankTrace t;
            t.channel = ch;
            t.rank = r;
            replica_log_.ranks.push_back(std::move(t));
        }
    }
    runtime_q_.resize(geo.channels);
    held_.resize(geo.channels);
    trace_q_.resize(geo.channels);
    host_rank_bursts_.assign(units_.size(), 0);
    host_last_column_.assign(geo.channels, std::nullopt);

    const std::uint32_t half = geo.ranks / 2;
    TrafficProfile profile = cfg_.traffic;
    if (cfg_.rank_partition && profile.rank_weights.empty()) {
        profile.rank_weights.assign(geo.ranks, 0.0);
        for (std::uint32_t r = 0; r < half; ++r) profile.rank_weights[r] = 1.0 / half;
    }
    if (!cfg_.trace_path.empty()) {
        std::ifstream in(cfg_.trace_path);
        if (!in) throw ConfigError("trace.path", "cannot open " + cfg_.trace_path);
        for (const auto& rec : read_trace(in)) {
            Transaction t = make_txn(rec.kind, rec.addr, -1);
            t.arrival_cycle = rec.cycle;
            trace_q_[t.addr.channel].push_back(t);
        }
    } else if (profile.rate > 0.0) {
        traffic_ = std::make_unique<TrafficGenerator>(profile, mapper_);
    }
    if (cfg_.kernel.enabled) {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> ranks;
        for (std::uint32_t ch = 0; ch < geo.channels; ++ch) {
            for (std::uint32_t r = cfg_.rank_partition ? half : 0; r < geo.ranks; ++r) ranks.emplace_back(ch, r);
        }
        driver_ = std::make_unique<KernelDriver>(*this, cfg_.kernel, std::move(ranks));
    }
}

System::~System() = default;

Region& System::operand_region(std::uint32_t color) {
    if (mapper_.config().mode == MappingMode::Partitioned) {
        if (!shared_region_) shared_region_.emplace(Region::shared(mapper_));
        return *shared_region_;
    }
    if (regions_.empty()) {
        for (std::uint32_t c = 0; c < mapper_.color_count(); ++c) regions_.push_back(Region::host(mapper_, c));
    }
    if (color >= regions_.size()) throw OutOfRange("color " + std::to_string(color) + " does not exist");
    return regions_[color];
}

PhysicalAddress System::control_address(std::uint32_t channel, std::uint32_t rank, std::uint32_t column) const {
    const auto& geo = cfg_.geometry;
    return mapper_.unmap(DramAddress{channel, rank, 0, geo.rows - 1, column});
}

Transaction System::make_txn(TxnKind kind, PhysicalAddress paddr, std::int64_t tag) const {
    Transaction t;
    t.kind = kind;
    t.paddr = paddr & ~std::uint64_t{kBlockBytes - 1};
    t.addr = mapper_.map(t.paddr);
    t.tag = tag;
    return t;
}

Ticket System::launch(const NdaInstruction& in, bool functional) { return launch_macro({in}, functional); }

Ticket System::launch_macro(const std::vector<NdaInstruction>& loop, bool functional) {
    if (loop.empty()) throw BoundsViolation("empty macro operation");
    for (const auto& in : loop) {
        if (in.channel >= cfg_.geometry.channels || in.rank >= cfg_.geometry.ranks) {
            throw LocalityViolation("instruction targets a rank that does not exist");
        }
        validate_instruction(in, mapper_);
    }
    const Ticket id = tickets_.size();
    TicketState ts;
    ts.nda = true;
    ts.outstanding = static_cast<std::uint32_t>(loop.size());
    ts.issued = now_;
    ts.instrs = loop;
    for (const auto& in : loop) ts.partials.push_back(functional ? execute_functional(in, memory_) : LanePartials{});
    tickets_.push_back(std::move(ts));

    for (std::uint32_t ch = 0; ch < cfg_.geometry.channels; ++ch) {
        Request rq;
        rq.packet = true;
        rq.ticket = id;
        for (const auto& in : loop) {
            if (in.channel != ch) continue;
            rq.instrs.emplace_back(in, instrs_.size());
            instrs_.push_back({id, fma_count(in)});
        }
        if (rq.instrs.empty()) continue;
        const auto& first = rq.instrs.front().first;
        const Transaction t = make_txn(TxnKind::Write, control_address(ch, first.rank, cfg_.geometry.columns - 1),
                                       static_cast<std::int64_t>(requests_.size()));
        requests_.push_back(std::move(rq));
        runtime_q_[ch].push_back(t);
        ++launch_packets_;
    }
    return id;
}

Ticket System::host_access(const std::vector<PhysicalAddress>& addrs, TxnKind kind) {
    const Ticket id = tickets_.size();
    TicketState ts;
    ts.nda = false;
    ts.outstanding = static_cast<std::uint32_t>(addrs.size());
    ts.issued = now_;
    ts.done_at = now_;
    tickets_.push_back(std::move(ts));
    for (auto a : addrs) {
        if (a >= mapper_.capacity()) throw OutOfRange("host access beyond memory");
        Request rq;
        rq.ticket = id;
        const Transaction t = make_txn(kind, a, static_cast<std::int64_t>(requests_.size()));
        requests_.push_back(std::move(rq));
        runtime_q_[t.addr.channel].push_back(t);
    }
    return id;
}

bool System::done(Ticket t) const {
    const auto& ts = tickets_.at(t);
    return ts.outstanding == 0 && now_ >= ts.done_at;
}

Cycle System::finished_at(Ticket t) const {
    if (!done(t)) throw Error("ticket " + std::to_string(t) + " has not completed");
    return tickets_[t].done_at;
}

const std::vector<LanePartials>& System::partials(Ticket t) const { return tickets_.at(t).partials; }

System::Reduction System::reduce_partials(Ticket t) {
    const auto& ts = tickets_.at(t);
    if (!ts.nda) throw Error("reduce_partials needs an NDA ticket");
    Reduction red;
    std::vector<PhysicalAddress> reads;
    double acc = 0.0;
    bool scalar = false;
    bool norm = false;
    for (std::size_t i = 0; i < ts.instrs.size(); ++i) {
        const auto& in = ts.instrs[i];
        const auto& p = ts.partials[i];
        switch (in.op) {
            case Opcode::DOT:
            case Opcode::NRM2:
                scalar = true;
                norm = norm || in.op == Opcode::NRM2;
                for (double v : p) acc += v;
                // Sixteen 8-byte accumulators fill two 64B register blocks.
                reads.push_back(control_address(in.channel, in.rank, 0));
                reads.push_back(control_address(in.channel, in.rank, 1));
                break;
            case Opcode::GEMV: {
                const std::size_t per_row = kChipsPerRank * kLanesPerChip;
                for (std::uint32_t r = 0; r < in.rows; ++r) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < per_row && r * per_row + k < p.size(); ++k) s += p[r * per_row + k];
                    red.values.push_back(s);
                    const auto& y = in.operands[2];
                    for (std::uint32_t lane = 0; lane < kLanesPerChip; ++lane) {
                        reads.push_back(y.vec->block_paddr(y.channel, y.rank, y.start + 2ull * r + lane));
                    }
                }
                break;
            }
            default:
                break;
        }
    }
    if (scalar) red.values.insert(red.values.begin(), norm ? std::sqrt(acc) : acc);
    red.reads = host_access(reads, TxnKind::Read);
    return red;
}

void System::feed(std::uint32_t ch) {
    auto& mc = mcs_[ch];
    auto& rq = runtime_q_[ch];
    while (!rq.empty() && mc.enqueue(rq.front(), now_)) rq.pop_front();

    auto admit = [&](const Transaction& t) {
        if (!mc.enqueue(t, now_)) return false;
        if (cfg_.record_log) txn_trace_.push_back({now_, t.kind, t.paddr});
        return true;
    };
    if (traffic_) {
        if (held_[ch]) {
            if (admit(*held_[ch])) held_[ch].reset();
        } else if (auto t = traffic_->next(ch, now_)) {
            if (!admit(*t)) held_[ch] = *t;
        }
    }
    auto& tq = trace_q_[ch];
    while (!tq.empty() && tq.front().arrival_cycle <= now_ && admit(tq.front())) tq.pop_front();
}

void System::account(const DramCommand& c) {
    const bool host = c.source == Source::Host;
    (host ? host_cmds_ : nda_cmds_)[kind_index(c.kind)]++;
    if (cfg_.record_log) log_.push_back(c);
    if (c.kind == CommandKind::ACT) ledger_.add(EnergyEvent::Act);
    if (!is_column(c.kind)) return;
    const std::size_t u = c.target.channel * cfg_.geometry.ranks + c.target.rank;
    if (host) {
        ledger_.add(EnergyEvent::HostBurst);
        ++host_rank_bursts_[u];
        auto& last = host_last_column_[c.target.channel];
        if (last == CommandKind::WR && c.kind == CommandKind::RD) ++host_turnarounds_;
        last = c.kind;
    } else {
        ledger_.add(EnergyEvent::PeBurst);
        ledger_.add(EnergyEvent::BufferAccess, kChipsPerRank);
    }
    auto& last = units_[u].last_column;
    if (last == CommandKind::WR && c.kind == CommandKind::RD) ++rank_turnarounds_;
    last = c.kind;
}

void System::on_complete(const Transaction& t) {
    if (t.tag < 0) {
        if (t.kind == TxnKind::Read) {
            ++host_reads_;
            read_latencies_.push_back(t.completion_cycle - t.arrival_cycle);
        } else {
            ++host_writes_;
        }
        return;
    }
    auto& rq = requests_.at(static_cast<std::size_t>(t.tag));
    if (rq.packet) {
        // The packet's data lands in the control registers at the end of the
        // write burst; both sides start from the same cycle.
        for (const auto& [in, id] : rq.instrs) {
            auto& u = unit(in.channel, in.rank);
            u.nda.launch(in, id, t.completion_cycle);
            u.replica.launch(in, id, t.completion_cycle);
        }
        rq.instrs.clear();
        rq.instrs.shrink_to_fit();
    } else {
        auto& ts = tickets_[rq.ticket];
        --ts.outstanding;
        ts.done_at = std::max(ts.done_at, t.completion_cycle);
    }
}

void System::drain_unit(std::size_t i) {
    auto& u = units_[i];
    auto& tr = replica_log_.ranks[i];
    for (const auto& c : u.nda.completions()) {
        ledger_.add(EnergyEvent::Fma, instrs_[c.id].fma);
        if (cfg_.check_replicas) tr.actual_done.push_back(c);
    }
    u.nda.completions().clear();
    for (const auto& c : u.replica.completions()) {
        auto& ts = tickets_[instrs_[c.id].ticket];
        --ts.outstanding;
        ts.done_at = std::max(ts.done_at, c.data_done);
        if (cfg_.check_replicas) tr.predicted_done.push_back(c);
    }
    u.replica.completions().clear();
    if (cfg_.check_replicas) {
        auto& a = u.nda.phase_events();
        tr.actual_phases.insert(tr.actual_phases.end(), a.begin(), a.end());
        auto& p = u.replica.phase_events();
        tr.predicted_phases.insert(tr.predicted_phases.end(), p.begin(), p.end());
    }
    u.nda.phase_events().clear();
    u.replica.phase_events().clear();
}

void System::step() {
    const auto& geo = cfg_.geometry;
    if (driver_) driver_->tick();
    for (std::uint32_t ch = 0; ch < geo.channels; ++ch) {
        feed(ch);
        auto& mc = mcs_[ch];
        if (auto c = mc.schedule(table_[ch], now_)) {
            // The table should equal the devices; a host command that is
            // illegal on the devices is the visible symptom of a desync.
            if (truth_[ch].can_issue(*c)) {
                truth_[ch].apply(*c);
            } else if (!replica_log_.table_mismatch) {
                replica_log_.table_mismatch = now_;
            }
            table_[ch].apply(*c);
            mc.commit(*c);
            account(*c);
        }
        for (const auto& t : mc.completed()) on_complete(t);
        mc.completed().clear();
    }
    for (std::size_t i = 0; i < units_.size(); ++i) {
        auto& u = units_[i];
        const std::uint32_t ch = u.nda.channel();
        const auto actual = u.nda.step(now_, truth_[ch], u.sig);
        const auto predicted = replica_step(u.replica, table_[ch], now_, u.sig);
        if (actual) account(*actual);
        if (cfg_.check_replicas) {
            auto& tr = replica_log_.ranks[i];
            if (actual) tr.actual.push_back(*actual);
            if (predicted) tr.predicted.push_back(*predicted);
        }
        drain_unit(i);
    }
    for (auto& u : units_) {
        const auto& mc = mcs_[u.nda.channel()];
        u.sig.hint = mc.next_rank_hint();
        u.sig.pending_banks = mc.pending_bank_mask(u.nda.rank());
        u.sig.yield = (mc.yield_mask(now_) >> u.nda.rank()) & 1u;
    }
    if (cfg_.check_replicas && (now_ + 1) % cfg_.table_check_interval == 0 && !replica_log_.table_mismatch) {
        for (std::uint32_t ch = 0; ch < geo.channels; ++ch) {
            if (!truth_[ch].same_state(table_[ch])) {
                replica_log_.table_mismatch = now_;
                break;
            }
        }
    }
    ++now_;
}

void System::run_for(Cycle n) {
    for (Cycle i = 0; i < n; ++i) step();
}

void System::run_until(Ticket t, Cycle limit) {
    const Cycle stop = now_ + limit;
    while (!done(t)) {
        if (now_ >= stop) throw Error("ticket " + std::to_string(t) + " did not complete in time");
        step();
    }
}

StatsReport System::run() {
    run_for(cfg_.cycles - now_);
    return report();
}

std::uint64_t System::audit() const { return audit_log(log_, cfg_.timing, cfg_.geometry).size(); }

void System::corrupt_replica_draw(std::uint32_t channel, std::uint32_t rank, std::uint64_t index) {
    unit(channel, rank).replica.corrupt_draw(index);
}

StatsReport System::report() const {
    const auto& geo = cfg_.geometry;
    const auto& tp = cfg_.timing;
    StatsReport r;
    r.cycles = now_;
    r.channels = geo.channels;
    r.ranks = geo.rank_count();
    r.seed = cfg_.seed;
    r.host_commands = host_cmds_;
    r.nda_commands = nda_cmds_;
    r.host_reads = host_reads_;
    r.host_writes = host_writes_;
    if (!read_latencies_.empty()) {
        std::vector<Cycle> lat = read_latencies_;
        double sum = 0;
        for (auto l : lat) sum += static_cast<double>(l);
        r.avg_read_latency = sum / static_cast<double>(lat.size());
        const std::size_t k = (lat.size() * 95 + 99) / 100 - 1;
        std::nth_element(lat.begin(), lat.begin() + static_cast<std::ptrdiff_t>(k), lat.end());
        r.p95_read_latency = lat[k];
        r.max_read_latency = *std::max_element(lat.begin(), lat.end());
    }
    const double cyc = static_cast<double>(std::max<Cycle>(now_, 1));
    r.reads_per_kcycle = 1000.0 * static_cast<double>(host_reads_) / cyc;
    const std::uint64_t host_bursts = host_cmds_[kind_index(CommandKind::RD)] + host_cmds_[kind_index(CommandKind::WR)];
    r.host_bus_utilization = static_cast<double>(host_bursts * tp.tBL) / (cyc * geo.channels);
    r.nda_write_bursts = nda_cmds_[kind_index(CommandKind::WR)];
    r.nda_bursts = nda_cmds_[kind_index(CommandKind::RD)] + r.nda_write_bursts;
    r.nda_bytes_per_cycle = static_cast<double>(r.nda_bursts * kBlockBytes) / cyc;
    for (auto b : host_rank_bursts_) {
        const auto busy = static_cast<Cycle>(b) * tp.tBL;
        const auto idle = static_cast<std::uint64_t>(std::max<Cycle>(0, now_ - busy));
        r.host_idle_rank_cycles += idle;
        r.ideal_nda_bursts += idle / static_cast<std::uint64_t>(tp.tBL);
    }
    r.nda_share_of_idle =
        r.ideal_nda_bursts == 0 ? 0.0 : static_cast<double>(r.nda_bursts) / static_cast<double>(r.ideal_nda_bursts);
    r.rank_turnarounds = rank_turnarounds_;
    r.host_turnarounds = host_turnarounds_;
    r.launch_packets = launch_packets_;
    if (cfg_.record_log) {
        for (const auto& h : idle_histogram(log_, geo, tp, now_)) r.idle += h;
    }
    double lat_sum = 0;
    for (const auto& ts : tickets_) {
        if (!ts.nda || ts.outstanding != 0 || ts.done_at > now_) continue;
        ++r.nda_ops_completed;
        const Cycle l = ts.done_at - ts.issued;
        lat_sum += static_cast<double>(l);
        r.max_nda_op_latency = std::max(r.max_nda_op_latency, l);
    }
    if (r.nda_ops_completed) r.avg_nda_op_latency = lat_sum / static_cast<double>(r.nda_ops_completed);

    EnergyLedger led = ledger_;
    led.set_elapsed(now_);
    for (std::size_t e = 0; e < kEnergyEventKinds; ++e) r.energy_counts[e] = led.count(static_cast<EnergyEvent>(e));
    r.event_fj = led.event_fj();
    r.event_nj = led.event_nj();
    r.leakage_nj = led.leakage_nj();
    r.total_nj = led.total_nj();
    r.average_power_mw = led.average_power_mw();
    if (cfg_.check_replicas) {
        const auto s = verify_sync(replica_log_);
        r.replicas_clean = s.clean;
        r.replica_detail = s.clean ? "CLEAN" : s.detail;
    } else {
        r.replica_detail = "unchecked";
    }
    return r;
}

}  // namespace ndasim

#include "ndasim/dram.hpp"

#include <algorithm>

#include "ndasim/errors.hpp"

namespace ndasim {

namespace {

inline void bump(IssueBound& b, Cycle at, const char* rule) {
    if (at > b.cycle) {
        b.cycle = at;
        b.rule = rule;
    }
}

}  // namespace

void TimingParams::validate() const {
    const std::pair<const char*, int> fields[] = {
        {"tBL", tBL},   {"tCCDS", tCCDS}, {"tCCDL", tCCDL}, {"tRTRS", tRTRS}, {"tCL", tCL},
        {"tRCD", tRCD}, {"tRP", tRP},     {"tCWL", tCWL},   {"tRAS", tRAS},   {"tRC", tRC},
        {"tRTP", tRTP}, {"tWTRS", tWTRS}, {"tWTRL", tWTRL}, {"tWR", tWR},     {"tRRDS", tRRDS},
        {"tRRDL", tRRDL}, {"tFAW", tFAW},
    };
    for (const auto& [name, v] : fields) {
        if (v <= 0) throw ConfigError(std::string("timing.") + name, "must be positive");
    }
    if (tRC < tRAS + tRP) throw ConfigError("timing.tRC", "must be >= tRAS + tRP");
}

ChannelState::ChannelState(std::uint32_t id, const Geometry& geo, const TimingParams& tp)
    : id_(id), geo_(geo), tp_(tp) {
    ranks_.resize(geo.ranks);
    for (std::uint32_t r = 0; r < geo.ranks; ++r) {
        auto& rk = ranks_[r];
        rk.id = r;
        rk.banks.assign(geo.banks, BankState{});
        rk.last_act.assign(geo.bank_groups, kNever);
        rk.last_rd.assign(geo.bank_groups, kNever);
        rk.last_wr.assign(geo.bank_groups, kNever);
    }
}

void ChannelState::check_structure(const DramCommand& cmd) const {
    const auto& t = cmd.target;
    if (t.rank >= geo_.ranks || (cmd.kind != CommandKind::PREA && t.bank >= geo_.banks)) {
        throw IllegalCommand("command target outside geometry: " + to_string(t));
    }
    if (cmd.kind == CommandKind::PREA) return;
    const auto& bk = ranks_[t.rank].banks[t.bank];
    switch (cmd.kind) {
        case CommandKind::ACT:
            if (bk.is_open()) throw IllegalCommand("ACT to open bank " + to_string(t));
            if (t.row >= geo_.rows) throw IllegalCommand("ACT row out of range " + to_string(t));
            break;
        case CommandKind::PRE:
            if (!bk.is_open()) throw IllegalCommand("PRE to closed bank " + to_string(t));
            break;
        case CommandKind::RD:
        case CommandKind::WR:
            if (!bk.is_open()) throw IllegalCommand("column command to closed bank " + to_string(t));
            if (static_cast<std::uint32_t>(bk.open_row) != t.row) {
                throw IllegalCommand("column command to wrong row " + to_string(t));
            }
            if (t.column >= geo_.columns) throw IllegalCommand("column out of range " + to_string(t));
            break;
        default:
            break;
    }
}

IssueBound ChannelState::earliest_bound(const DramCommand& cmd) const {
    check_structure(cmd);
    const auto& t = cmd.target;
    const auto& rk = ranks_[t.rank];
    IssueBound b{0, "none"};
    bump(b, rk.last_cmd + 1, "rank-cmd-slot");
    if (cmd.source == Source::Host) bump(b, last_host_cmd_ + 1, "ca-bus");

    switch (cmd.kind) {
        case CommandKind::ACT: {
            const auto& bk = rk.banks[t.bank];
            bump(b, bk.next_act, bk.act_rule);
            const auto g = geo_.group_of(t.bank);
            for (std::uint32_t h = 0; h < geo_.bank_groups; ++h) {
                bump(b, rk.last_act[h] + (h == g ? tp_.tRRDL : tp_.tRRDS), h == g ? "tRRDL" : "tRRDS");
            }
            bump(b, rk.oldest_act() + tp_.tFAW, "tFAW");
            break;
        }
        case CommandKind::PRE: {
            const auto& bk = rk.banks[t.bank];
            bump(b, bk.next_pre, bk.pre_rule);
            break;
        }
        case CommandKind::PREA:
            for (const auto& bk : rk.banks) {
                if (bk.is_open()) bump(b, bk.next_pre, bk.pre_rule);
            }
            break;
        case CommandKind::RD:
        case CommandKind::WR: {
            const bool rd = cmd.kind == CommandKind::RD;
            const auto& bk = rk.banks[t.bank];
            bump(b, rd ? bk.next_rd : bk.next_wr, bk.col_rule);
            const auto g = geo_.group_of(t.bank);
            for (std::uint32_t h = 0; h < geo_.bank_groups; ++h) {
                const bool same = h == g;
                const int ccd = same ? tp_.tCCDL : tp_.tCCDS;
                const char* ccd_rule = same ? "tCCDL" : "tCCDS";
                if (rd) {
                    bump(b, rk.last_rd[h] + ccd, ccd_rule);
                    bump(b, rk.last_wr[h] + tp_.write_to_read(same), same ? "tWTRL" : "tWTRS");
                } else {
                    bump(b, rk.last_wr[h] + ccd, ccd_rule);
                    bump(b, rk.last_rd[h] + std::max(ccd, tp_.read_to_write()), "tRTW");
                }
            }
            if (cmd.source == Source::Host) {
                // Data-bus occupancy: the burst must start after the last host burst,
                // plus the rank-to-rank switch gap when the driving rank changes.
                const int lat = rd ? tp_.tCL : tp_.tCWL;
                const int gap = (t.rank != bus_rank_) ? tp_.tRTRS : 0;
                bump(b, bus_end_ + gap - lat, gap ? "tRTRS" : "data-bus");
            }
            break;
        }
    }
    return b;
}

bool ChannelState::can_issue(const DramCommand& cmd) const {
    const auto& t = cmd.target;
    if (cmd.kind != CommandKind::PREA) {
        const auto& bk = ranks_[t.rank].banks[t.bank];
        switch (cmd.kind) {
            case CommandKind::ACT:
                if (bk.is_open()) return false;
                break;
            case CommandKind::PRE:
                if (!bk.is_open()) return false;
                break;
            default:
                if (!bk.is_open() || static_cast<std::uint32_t>(bk.open_row) != t.row) return false;
        }
    }
    return earliest_bound(cmd).cycle <= cmd.issue_cycle;
}

void ChannelState::apply(const DramCommand& cmd) {
    const IssueBound b = earliest_bound(cmd);
    if (b.cycle > cmd.issue_cycle) throw TimingViolation(b.rule, b.cycle - cmd.issue_cycle);

    const Cycle now = cmd.issue_cycle;
    const auto& t = cmd.target;
    auto& rk = ranks_[t.rank];
    rk.last_cmd = now;
    if (cmd.source == Source::Host) last_host_cmd_ = now;

    auto raise = [](Cycle& slot, const char*& rule, Cycle at, const char* why) {
        if (at > slot) {
            slot = at;
            rule = why;
        }
    };

    switch (cmd.kind) {
        case CommandKind::ACT: {
            auto& bk = rk.banks[t.bank];
            bk.open_row = static_cast<std::int32_t>(t.row);
            raise(bk.next_act, bk.act_rule, now + tp_.tRC, "tRC");
            raise(bk.next_pre, bk.pre_rule, now + tp_.tRAS, "tRAS");
            if (now + tp_.tRCD > bk.next_rd) bk.col_rule = "tRCD";
            bk.next_rd = std::max(bk.next_rd, now + tp_.tRCD);
            bk.next_wr = std::max(bk.next_wr, now + tp_.tRCD);
            rk.last_act[geo_.group_of(t.bank)] = now;
            rk.record_act(now);
            break;
        }
        case CommandKind::PRE:
        case CommandKind::PREA: {
            auto close = [&](BankState& bk) {
                bk.open_row = BankState::kClosed;
                raise(bk.next_act, bk.act_rule, now + tp_.tRP, "tRP");
            };
            if (cmd.kind == CommandKind::PRE) {
                close(rk.banks[t.bank]);
            } else {
                for (auto& bk : rk.banks) close(bk);
            }
            break;
        }
        case CommandKind::RD: {
            auto& bk = rk.banks[t.bank];
            raise(bk.next_pre, bk.pre_rule, now + tp_.tRTP, "tRTP");
            rk.last_rd[geo_.group_of(t.bank)] = now;
            if (cmd.source == Source::Host) {
                bus_end_ = std::max(bus_end_, now + tp_.tCL + tp_.tBL);
                bus_rank_ = t.rank;
            }
            break;
        }
        case CommandKind::WR: {
            auto& bk = rk.banks[t.bank];
            raise(bk.next_pre, bk.pre_rule, now + tp_.write_recovery(), "tWR");
            rk.last_wr[geo_.group_of(t.bank)] = now;
            if (cmd.source == Source::Host) {
                bus_end_ = std::max(bus_end_, now + tp_.tCWL + tp_.tBL);
                bus_rank_ = t.rank;
            }
            break;
        }
    }
}

bool ChannelState::same_state(const ChannelState& o) const {
    if (ranks_.size() != o.ranks_.size() || last_host_cmd_ != o.last_host_cmd_ || bus_end_ != o.bus_end_ ||
        bus_rank_ != o.bus_rank_) {
        return false;
    }
    for (std::size_t r = 0; r < ranks_.size(); ++r) {
        const auto& a = ranks_[r];
        const auto& b = o.ranks_[r];
        if (a.act_window != b.act_window || a.act_head != b.act_head || a.last_act != b.last_act ||
            a.last_rd != b.last_rd || a.last_wr != b.last_wr || a.last_cmd != b.last_cmd) {
            return false;
        }
        for (std::size_t k = 0; k < a.banks.size(); ++k) {
            const auto& x = a.banks[k];
            const auto& y = b.banks[k];
            if (x.open_row != y.open_row || x.next_act != y.next_act || x.next_pre != y.next_pre ||
                x.next_rd != y.next_rd || x.next_wr != y.next_wr) {
                return false;
            }
        }
    }
    return true;
}

Cycle earliest_issue(const ChannelState& channel, const DramCommand& cmd) { return channel.earliest_issue(cmd); }

ChannelState apply_command(ChannelState channel, const DramCommand& cmd) {
    channel.apply(cmd);
    return channel;
}

}  // namespace ndasim

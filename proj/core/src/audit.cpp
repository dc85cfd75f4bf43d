#include "ndasim/audit.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "ndasim/errors.hpp"

namespace ndasim {

namespace {

// Commands older than this can no longer constrain anything (tRC is the longest rule).
constexpr Cycle kLookback = 128;

struct Gap {
    int cycles = 0;
    const char* rule = nullptr;
};

void consider(Gap& g, int cycles, const char* rule) {
    if (!g.rule || cycles > g.cycles) g = Gap{cycles, rule};
}

/// Minimum issue separation required between two commands to the same rank.
Gap required_gap(const DramCommand& prev, const DramCommand& cur, const TimingParams& tp, const Geometry& geo) {
    Gap g;
    const bool prev_all = prev.kind == CommandKind::PREA;
    const bool cur_all = cur.kind == CommandKind::PREA;
    const bool same_bank = prev_all || cur_all || prev.target.bank == cur.target.bank;
    const bool same_group =
        !prev_all && !cur_all && geo.group_of(prev.target.bank) == geo.group_of(cur.target.bank);
    const int ccd = same_group ? tp.tCCDL : tp.tCCDS;

    switch (prev.kind) {
        case CommandKind::ACT:
            if (cur.kind == CommandKind::ACT) {
                if (same_bank) consider(g, tp.tRC, "tRC");
                else consider(g, same_group ? tp.tRRDL : tp.tRRDS, same_group ? "tRRDL" : "tRRDS");
            } else if ((cur.kind == CommandKind::PRE && same_bank) || cur_all) {
                consider(g, tp.tRAS, "tRAS");
            } else if (is_column(cur.kind) && same_bank) {
                consider(g, tp.tRCD, "tRCD");
            }
            break;
        case CommandKind::PRE:
        case CommandKind::PREA:
            if (cur.kind == CommandKind::ACT && same_bank) consider(g, tp.tRP, "tRP");
            break;
        case CommandKind::RD:
            if (cur.kind == CommandKind::RD) consider(g, ccd, same_group ? "tCCDL" : "tCCDS");
            if (cur.kind == CommandKind::WR) {
                consider(g, ccd, same_group ? "tCCDL" : "tCCDS");
                consider(g, tp.tCL + tp.tBL + 2 - tp.tCWL, "tRTW");
            }
            if ((cur.kind == CommandKind::PRE && same_bank) || cur_all) consider(g, tp.tRTP, "tRTP");
            break;
        case CommandKind::WR:
            if (cur.kind == CommandKind::WR) consider(g, ccd, same_group ? "tCCDL" : "tCCDS");
            if (cur.kind == CommandKind::RD) {
                consider(g, tp.tCWL + tp.tBL + (same_group ? tp.tWTRL : tp.tWTRS), same_group ? "tWTRL" : "tWTRS");
            }
            if ((cur.kind == CommandKind::PRE && same_bank) || cur_all) {
                consider(g, tp.tCWL + tp.tBL + tp.tWR, "tWR");
            }
            break;
    }
    return g;
}

struct Burst {
    Cycle start;
    Cycle end;
    std::uint32_t rank;
};

struct RankHistory {
    std::deque<DramCommand> recent;
    std::map<std::uint32_t, std::uint32_t> open_rows;  // bank -> row
};

struct ChannelHistory {
    std::vector<RankHistory> ranks;
    std::deque<Burst> bursts;
    Cycle last_host_cmd = kNever;
};

}  // namespace

std::vector<Violation> audit_log(std::span<const DramCommand> log, const TimingParams& tp, const Geometry& geo) {
    std::vector<Violation> out;
    std::vector<ChannelHistory> channels(geo.channels);
    for (auto& ch : channels) ch.ranks.resize(geo.ranks);
    Cycle prev_cycle = kNever;

    for (const auto& cmd : log) {
        auto report = [&](std::string rule, std::int64_t deficit) { out.push_back({cmd, std::move(rule), deficit}); };
        const auto& t = cmd.target;
        if (cmd.issue_cycle < prev_cycle) report("unsorted-log", prev_cycle - cmd.issue_cycle);
        prev_cycle = std::max(prev_cycle, cmd.issue_cycle);
        if (t.channel >= geo.channels || t.rank >= geo.ranks ||
            (cmd.kind != CommandKind::PREA && (t.bank >= geo.banks || t.row >= geo.rows)) ||
            (is_column(cmd.kind) && t.column >= geo.columns)) {
            report("malformed", 0);
            continue;
        }
        auto& ch = channels[t.channel];
        auto& rh = ch.ranks[t.rank];

        // Bank status.
        switch (cmd.kind) {
            case CommandKind::ACT:
                if (rh.open_rows.count(t.bank)) report("act-to-open-bank", 0);
                rh.open_rows[t.bank] = t.row;
                break;
            case CommandKind::PRE:
                if (!rh.open_rows.count(t.bank)) report("pre-to-closed-bank", 0);
                rh.open_rows.erase(t.bank);
                break;
            case CommandKind::PREA:
                rh.open_rows.clear();
                break;
            case CommandKind::RD:
            case CommandKind::WR: {
                auto it = rh.open_rows.find(t.bank);
                if (it == rh.open_rows.end()) report("column-to-closed-bank", 0);
                else if (it->second != t.row) report("column-to-wrong-row", 0);
                break;
            }
        }

        // Pairwise separations within the rank, and the four-activate window.
        while (!rh.recent.empty() && rh.recent.front().issue_cycle + kLookback < cmd.issue_cycle) {
            rh.recent.pop_front();
        }
        std::vector<Cycle> acts_in_window;
        for (const auto& prev : rh.recent) {
            if (prev.issue_cycle == cmd.issue_cycle) report("rank-cmd-slot", 1);
            const Gap g = required_gap(prev, cmd, tp, geo);
            if (g.rule && cmd.issue_cycle - prev.issue_cycle < g.cycles) {
                report(g.rule, g.cycles - (cmd.issue_cycle - prev.issue_cycle));
            }
            if (prev.kind == CommandKind::ACT && prev.issue_cycle > cmd.issue_cycle - tp.tFAW) {
                acts_in_window.push_back(prev.issue_cycle);
            }
        }
        if (cmd.kind == CommandKind::ACT && acts_in_window.size() >= 4) {
            std::sort(acts_in_window.begin(), acts_in_window.end());
            const Cycle fourth_back = acts_in_window[acts_in_window.size() - 4];
            report("tFAW", fourth_back + tp.tFAW - cmd.issue_cycle);
        }
        rh.recent.push_back(cmd);

        // Shared channel resources are only used by host commands.
        if (cmd.source == Source::Host) {
            if (cmd.issue_cycle == ch.last_host_cmd) report("ca-bus", 1);
            ch.last_host_cmd = cmd.issue_cycle;
            if (is_column(cmd.kind)) {
                const Cycle start = cmd.issue_cycle + (cmd.kind == CommandKind::RD ? tp.tCL : tp.tCWL);
                const Burst nb{start, start + tp.tBL, t.rank};
                while (!ch.bursts.empty() && ch.bursts.front().end + kLookback < start) ch.bursts.pop_front();
                for (const auto& b : ch.bursts) {
                    const int gap = b.rank == nb.rank ? 0 : tp.tRTRS;
                    const bool ok = nb.start >= b.end + gap || b.start >= nb.end + gap;
                    if (!ok) {
                        const Cycle shift = std::min(b.end + gap - nb.start, nb.end + gap - b.start);
                        report(gap ? "tRTRS" : "data-bus-overlap", shift);
                    }
                }
                ch.bursts.push_back(nb);
            }
        }
    }
    return out;
}

std::string format_command(const DramCommand& c) {
    std::ostringstream os;
    os << c.issue_cycle << ',' << (c.source == Source::Host ? 'H' : 'N') << ',' << to_string(c.kind) << ','
       << c.target.channel << ',' << c.target.rank << ',' << c.target.bank << ',' << c.target.row << ','
       << c.target.column;
    return os.str();
}

void write_command_log(std::ostream& os, std::span<const DramCommand> log) {
    for (const auto& c : log) os << format_command(c) << '\n';
}

std::vector<DramCommand> read_command_log(std::istream& is) {
    std::vector<DramCommand> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ls, field, ',')) f.push_back(field);
        if (f.size() != 8 || (f[1] != "H" && f[1] != "N")) {
            throw Error("command log line " + std::to_string(lineno) + ": malformed record");
        }
        DramCommand c;
        c.issue_cycle = std::stoll(f[0]);
        c.source = f[1] == "H" ? Source::Host : Source::Nda;
        c.kind = parse_command_kind(f[2]);
        c.target = {static_cast<std::uint32_t>(std::stoul(f[3])), static_cast<std::uint32_t>(std::stoul(f[4])),
                    static_cast<std::uint32_t>(std::stoul(f[5])), static_cast<std::uint32_t>(std::stoul(f[6])),
                    static_cast<std::uint32_t>(std::stoul(f[7]))};
        out.push_back(c);
    }
    return out;
}

}  // namespace ndasim

#include "ndasim/replication.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

namespace ndasim {

NdaFsm replica_init(const NdaInstruction& in, std::uint64_t id, Cycle active_at, const AddressMapper& mapper,
                    const TimingParams& tp, const NdaPolicy& policy) {
    NdaFsm f(in.channel, in.rank, mapper, tp, policy);
    f.launch(in, id, active_at);
    return f;
}

std::optional<DramCommand> replica_step(NdaFsm& replica, ChannelState& table, Cycle now, const IssueSignals& sig) {
    return replica.step(now, table, sig);
}

namespace {

std::string describe(const DramCommand* c) {
    if (!c) return "none";
    std::ostringstream os;
    os << to_string(c->kind) << '@' << c->issue_cycle << " b" << c->target.bank << " r" << c->target.row << " c"
       << c->target.column;
    return os.str();
}

void note(SyncReport& rep, Cycle at, const RankTrace& t, std::string what) {
    if (!rep.clean && rep.first_divergence <= at) return;
    rep.clean = false;
    rep.first_divergence = at;
    rep.channel = t.channel;
    rep.rank = t.rank;
    rep.detail = std::move(what);
}

}  // namespace

SyncReport verify_sync(const ReplicaLog& log) {
    SyncReport rep;
    for (const auto& t : log.ranks) {
        const std::size_t n = std::min(t.predicted.size(), t.actual.size());
        std::size_t i = 0;
        for (; i < n; ++i) {
            if (!(t.predicted[i] == t.actual[i])) break;
        }
        rep.commands_compared += i;
        if (i < n || t.predicted.size() != t.actual.size()) {
            const DramCommand* p = i < t.predicted.size() ? &t.predicted[i] : nullptr;
            const DramCommand* a = i < t.actual.size() ? &t.actual[i] : nullptr;
            const Cycle at = std::min(p ? p->issue_cycle : INT64_MAX, a ? a->issue_cycle : INT64_MAX);
            note(rep, at, t, "command stream: predicted " + describe(p) + ", actual " + describe(a));
        }
        const std::size_t m = std::min(t.predicted_phases.size(), t.actual_phases.size());
        std::size_t j = 0;
        for (; j < m; ++j) {
            if (!(t.predicted_phases[j] == t.actual_phases[j])) break;
        }
        rep.phase_events_compared += j;
        if (j < m || t.predicted_phases.size() != t.actual_phases.size()) {
            Cycle at = INT64_MAX;
            if (j < t.predicted_phases.size()) at = t.predicted_phases[j].cycle;
            if (j < t.actual_phases.size()) at = std::min(at, t.actual_phases[j].cycle);
            note(rep, at, t, "write-phase boundary #" + std::to_string(j));
        }
        if (t.predicted_done != t.actual_done) {
            Cycle at = INT64_MAX;
            for (std::size_t k = 0; k < std::max(t.predicted_done.size(), t.actual_done.size()); ++k) {
                const bool same = k < t.predicted_done.size() && k < t.actual_done.size() &&
                                  t.predicted_done[k] == t.actual_done[k];
                if (!same) {
                    if (k < t.predicted_done.size()) at = std::min(at, t.predicted_done[k].finished);
                    if (k < t.actual_done.size()) at = std::min(at, t.actual_done[k].finished);
                    break;
                }
            }
            note(rep, at, t, "instruction completion");
        }
    }
    if (log.table_mismatch) {
        RankTrace none;
        note(rep, *log.table_mismatch, none, "host state table differs from device state");
    }
    return rep;
}

void write_replica_trace(std::ostream& out, const ReplicaLog& log) {
    out << "cycle,channel,rank,predicted,actual\n";
    for (const auto& t : log.ranks) {
        std::size_t i = 0, j = 0;
        while (i < t.predicted.size() || j < t.actual.size()) {
            const Cycle cp = i < t.predicted.size() ? t.predicted[i].issue_cycle : INT64_MAX;
            const Cycle ca = j < t.actual.size() ? t.actual[j].issue_cycle : INT64_MAX;
            const Cycle c = std::min(cp, ca);
            out << c << ',' << t.channel << ',' << t.rank << ',';
            out << (cp == c ? describe(&t.predicted[i++]) : "none") << ',';
            out << (ca == c ? describe(&t.actual[j++]) : "none") << '\n';
        }
    }
}

}  // namespace ndasim

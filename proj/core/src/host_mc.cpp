#include "ndasim/host_mc.hpp"

#include "ndasim/errors.hpp"

namespace ndasim {

void HostPolicy::validate() const {
    if (read_queue == 0) throw ConfigError("host.read_queue", "must be positive");
    if (write_queue == 0) throw ConfigError("host.write_queue", "must be positive");
    if (drain_high > write_queue || drain_low >= drain_high) {
        throw ConfigError("host.drain_high", "need drain_low < drain_high <= write_queue");
    }
    if (starvation_cap <= 0) throw ConfigError("host.starvation_cap", "must be positive");
    if (nda_yield_age <= 0) throw ConfigError("host.nda_yield_age", "must be positive");
}

HostPolicy HostPolicy::from_config(const KeyValueConfig& kv) {
    HostPolicy p;
    p.read_queue = static_cast<std::uint32_t>(kv.get_uint("host.read_queue", p.read_queue));
    p.write_queue = static_cast<std::uint32_t>(kv.get_uint("host.write_queue", p.write_queue));
    p.drain_high = static_cast<std::uint32_t>(kv.get_uint("host.drain_high", p.write_queue * 3 / 4));
    p.drain_low = static_cast<std::uint32_t>(kv.get_uint("host.drain_low", p.write_queue / 4));
    p.starvation_cap = kv.get_int("host.starvation_cap", p.starvation_cap);
    p.nda_yield_age = kv.get_int("host.nda_yield_age", p.nda_yield_age);
    p.validate();
    return p;
}

HostController::HostController(std::uint32_t channel, const Geometry& geo, const TimingParams& tp, HostPolicy policy)
    : channel_(channel), geo_(geo), tp_(tp), policy_(policy) {
    policy_.validate();
    reads_.reserve(policy_.read_queue);
    writes_.reserve(policy_.write_queue);
}

bool HostController::can_accept(TxnKind k) const {
    return k == TxnKind::Read ? reads_.size() < policy_.read_queue : writes_.size() < policy_.write_queue;
}

bool HostController::enqueue(Transaction txn, Cycle now) {
    if (!can_accept(txn.kind)) return false;
    if (txn.addr.channel != channel_) throw OutOfRange("transaction routed to the wrong channel");
    txn.arrival_cycle = now;
    txn.id = next_id_++;
    (txn.kind == TxnKind::Read ? reads_ : writes_).push_back(txn);
    return true;
}

bool HostController::row_hit_pending(const std::vector<Transaction>& q, const DramAddress& a, std::int32_t row) const {
    for (const auto& t : q) {
        if (t.addr.rank == a.rank && t.addr.bank == a.bank && static_cast<std::int32_t>(t.addr.row) == row) return true;
    }
    return false;
}

std::optional<HostController::Pick> HostController::choose(const ChannelState& table, Cycle now) {
    if (writes_.size() >= policy_.drain_high) draining_ = true;
    if (writes_.size() <= policy_.drain_low) draining_ = false;

    auto command_for = [&](const Transaction& t, bool check_hits, const std::vector<Transaction>& q,
                           DramCommand& out) {
        const auto& bk = table.bank(t.addr.rank, t.addr.bank);
        out.target = t.addr;
        out.source = Source::Host;
        out.issue_cycle = now;
        if (!bk.is_open()) {
            out.kind = CommandKind::ACT;
        } else if (static_cast<std::uint32_t>(bk.open_row) == t.addr.row) {
            out.kind = t.kind == TxnKind::Read ? CommandKind::RD : CommandKind::WR;
        } else {
            if (check_hits && row_hit_pending(q, t.addr, bk.open_row)) return false;
            out.kind = CommandKind::PRE;
        }
        return true;
    };

    // Starved transactions preempt first-ready ordering, oldest first.
    {
        std::size_t ri = 0, wi = 0;
        while (ri < reads_.size() || wi < writes_.size()) {
            const bool take_read =
                wi >= writes_.size() || (ri < reads_.size() && reads_[ri].id < writes_[wi].id);
            auto& q = take_read ? reads_ : writes_;
            const std::size_t i = take_read ? ri++ : wi++;
            if (now - q[i].arrival_cycle < policy_.starvation_cap) break;  // queues are age-ordered
            DramCommand c;
            command_for(q[i], false, q, c);
            if (table.can_issue(c)) return Pick{c, &q, i};
        }
        // If the oldest transaction is starved, hold other traffic back until it issues.
        const Transaction* oldest = nullptr;
        if (!reads_.empty()) oldest = &reads_.front();
        if (!writes_.empty() && (!oldest || writes_.front().id < oldest->id)) oldest = &writes_.front();
        if (oldest && now - oldest->arrival_cycle >= policy_.starvation_cap) return std::nullopt;
    }

    std::vector<Transaction>* q = nullptr;
    if (draining_ || reads_.empty()) q = &writes_;
    else q = &reads_;
    if (q->empty()) return std::nullopt;

    std::optional<Pick> row_pick;
    for (std::size_t i = 0; i < q->size(); ++i) {
        DramCommand c;
        if (!command_for((*q)[i], true, *q, c)) continue;
        if (is_column(c.kind)) {
            if (table.can_issue(c)) return Pick{c, q, i};
        } else if (!row_pick && table.can_issue(c)) {
            row_pick = Pick{c, q, i};
        }
    }
    return row_pick;
}

std::optional<DramCommand> HostController::schedule(const ChannelState& table, Cycle now) {
    last_pick_.reset();
    if (idle()) return std::nullopt;
    last_pick_ = choose(table, now);
    if (!last_pick_) return std::nullopt;
    return last_pick_->cmd;
}

void HostController::commit(const DramCommand& cmd) {
    if (!last_pick_ || !(last_pick_->cmd == cmd)) throw Error("commit of a command that was not scheduled");
    if (is_column(cmd.kind)) {
        auto& q = *last_pick_->queue;
        Transaction t = q[last_pick_->index];
        t.completion_cycle = cmd.issue_cycle + (cmd.kind == CommandKind::RD ? tp_.tCL : tp_.tCWL) + tp_.tBL;
        q.erase(q.begin() + static_cast<std::ptrdiff_t>(last_pick_->index));
        completed_.push_back(t);
    }
    last_pick_.reset();
}

std::optional<std::uint32_t> HostController::next_rank_hint() const {
    // Buffered writes are normally waiting for a drain, so the request the
    // host serves next is the oldest read unless a drain is under way.
    if (draining_ || reads_.empty()) return std::nullopt;
    return reads_.front().addr.rank;
}

std::uint32_t HostController::yield_mask(Cycle now) const {
    // Only the queue being served counts: buffered writes normally wait for a
    // drain and must not hold the NDAs off. Starved requests always count.
    const auto& serving = (draining_ || reads_.empty()) ? writes_ : reads_;
    std::uint32_t m = 0;
    for (const auto* q : {&reads_, &writes_}) {
        const Cycle age = q == &serving ? policy_.nda_yield_age : policy_.starvation_cap;
        for (const auto& t : *q) {  // age-ordered
            if (now - t.arrival_cycle < age) break;
            m |= 1u << t.addr.rank;
        }
    }
    return m;
}

std::uint32_t HostController::pending_bank_mask(std::uint32_t rank) const {
    std::uint32_t m = 0;
    for (const auto& t : reads_) {
        if (t.addr.rank == rank) m |= 1u << t.addr.bank;
    }
    for (const auto& t : writes_) {
        if (t.addr.rank == rank) m |= 1u << t.addr.bank;
    }
    return m;
}

bool enqueue(HostController& mc, const Transaction& txn, Cycle now) { return mc.enqueue(txn, now); }

std::optional<DramCommand> schedule(HostController& mc, const ChannelState& table, Cycle now) {
    return mc.schedule(table, now);
}

std::optional<std::uint32_t> next_rank_hint(const HostController& mc) { return mc.next_rank_hint(); }

}  // namespace ndasim

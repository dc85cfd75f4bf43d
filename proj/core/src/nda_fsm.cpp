#include "ndasim/nda_fsm.hpp"

#include <cmath>

#include "ndasim/errors.hpp"

namespace ndasim {

void NdaPolicy::validate() const {
    if (!(write_probability >= 0.0 && write_probability <= 1.0)) {
        throw ConfigError("nda.write_probability", "must lie in [0, 1]");
    }
    if (lookahead == 0) throw ConfigError("nda.lookahead", "must be positive");
    if (write_buffer == 0 || write_buffer > 128) throw ConfigError("nda.write_buffer", "must be in [1, 128]");
    if (write_phase_enter == 0 || write_phase_enter > write_buffer) {
        throw ConfigError("nda.write_phase_enter", "must be in [1, write_buffer]");
    }
}

NdaPolicy NdaPolicy::from_config(const KeyValueConfig& kv) {
    NdaPolicy p;
    p.stochastic = kv.get_bool("nda.stochastic", p.stochastic);
    p.write_probability = kv.get_double("nda.write_probability", p.write_probability);
    p.next_rank_hint = kv.get_bool("nda.next_rank_hint", p.next_rank_hint);
    p.lookahead = static_cast<std::uint32_t>(kv.get_uint("nda.lookahead", p.lookahead));
    p.write_phase_enter = static_cast<std::uint32_t>(kv.get_uint("nda.write_phase_enter", p.write_phase_enter));
    p.validate();
    return p;
}

std::uint32_t NdaPolicy::threshold() const {
    return static_cast<std::uint32_t>(std::llround(write_probability * 65536.0));
}

std::string_view to_string(PePhase p) {
    switch (p) {
        case PePhase::StreamX: return "STREAM_X";
        case PePhase::ReadExec: return "READ_EXEC";
        case PePhase::WriteBack: return "WRITE_BACK";
        case PePhase::Done: return "DONE";
    }
    return "?";
}

std::uint64_t splitmix64(std::uint64_t x) {
    std::uint64_t z = x + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

NdaFsm::NdaFsm(std::uint32_t channel, std::uint32_t rank, const AddressMapper& mapper, const TimingParams& tp,
               NdaPolicy policy)
    : channel_(channel), rank_(rank), mapper_(&mapper), tp_(tp), policy_(policy), threshold_(policy.threshold()) {
    policy_.validate();
    window_.reserve(4 * kBatchBlocks + 64);
}

void NdaFsm::launch(const NdaInstruction& in, std::uint64_t id, Cycle active_at) {
    if (in.channel != channel_ || in.rank != rank_) throw LocalityViolation("instruction routed to the wrong rank");
    queue_.push_back({in, id, active_at});
}

bool NdaFsm::activate(Cycle now) {
    if (queue_.empty() || queue_.front().active_at > now) return false;
    const Pending& p = queue_.front();
    stream_.emplace(p.in, *mapper_);
    cur_id_ = p.id;
    cur_seed_ = p.in.seed;
    counter_ = 0;
    next_batch_ = 0;
    batch_starts_.clear();
    base_seq_ += static_cast<std::int64_t>(window_.size());
    window_.clear();
    head_ = 0;
    queue_.pop_front();
    return true;
}

void NdaFsm::refill() {
    while (window_.size() - head_ < policy_.lookahead && next_batch_ < stream_->batches()) {
        if (head_ >= 2 * kBatchBlocks) {
            window_.erase(window_.begin(), window_.begin() + static_cast<std::ptrdiff_t>(head_));
            base_seq_ += static_cast<std::int64_t>(head_);
            head_ = 0;
        }
        const std::int64_t first = base_seq_ + static_cast<std::int64_t>(window_.size());
        batch_starts_.push_back(first);
        stream_->append_batch(next_batch_++, window_, first);
    }
}

void NdaFsm::finish(Cycle /*now*/) {
    completions_.push_back({cur_id_, last_issue_, last_done_});
    stream_.reset();
}

bool NdaFsm::coin() {
    const std::uint64_t r = splitmix64(cur_seed_ + counter_++);
    bool pass = (r >> 48) < threshold_;
    if (draws_ == corrupt_index_) pass = !pass;
    ++draws_;
    if (!pass) ++rejects_;
    return pass;
}

void NdaFsm::note_phase(Cycle now) {
    if (!write_phase_ && wb_ >= policy_.write_phase_enter) {
        write_phase_ = true;
        phase_events_.push_back({now, true});
    } else if (write_phase_ && wb_ == 0) {
        write_phase_ = false;
        phase_events_.push_back({now, false});
    }
}

void NdaFsm::issue(const DramCommand& c, ChannelState& state, Cycle now) {
    state.apply(c);
    if (!is_column(c.kind)) return;
    const Access& a = window_[head_];
    const std::int64_t seq = base_seq_ + static_cast<std::int64_t>(head_);
    if (c.kind == CommandKind::RD) {
        const Cycle done = now + tp_.tCL + tp_.tBL;
        ready_[static_cast<std::size_t>(seq) % kReadyRing] = done;
        wb_ += a.produces;
        last_done_ = std::max(last_done_, done);
    } else {
        --wb_;
        last_done_ = std::max(last_done_, now + tp_.tCWL + tp_.tBL);
    }
    last_issue_ = now;
    ++head_;
    note_phase(now);
}

std::optional<DramCommand> NdaFsm::step(Cycle now, ChannelState& state, const IssueSignals& sig) {
    if (!stream_ && !activate(now)) return std::nullopt;
    refill();
    while (head_ == window_.size()) {
        finish(now);
        if (!activate(now)) return std::nullopt;
        refill();
    }

    Access& head = window_[head_];
    if (head.preload) {
        wb_ += head.preload;
        head.preload = 0;
        note_phase(now);
    }
    if (sig.yield) return std::nullopt;

    const auto& bk = state.bank(rank_, head.addr.bank);
    if (bk.is_open() && static_cast<std::uint32_t>(bk.open_row) == head.addr.row) {
        const DramCommand c{head.kind, head.addr, Source::Nda, now};
        bool gate = true;
        if (head.kind == CommandKind::WR) {
            if (head.dep >= 0 && ready_[static_cast<std::size_t>(head.dep) % kReadyRing] > now) gate = false;
            if (gate && policy_.next_rank_hint && sig.hint && *sig.hint == rank_) gate = false;
        }
        if (gate && state.can_issue(c)) {
            if (!(head.kind == CommandKind::WR && policy_.stochastic && !coin())) {
                issue(c, state, now);
                return c;
            }
        }
    }

    // Prepare rows for upcoming accesses. A bank is only touched on behalf of
    // the earliest pending access to it, so no needed row is closed early.
    std::uint32_t seen = 0;
    const std::size_t end = std::min(window_.size(), head_ + policy_.lookahead);
    for (std::size_t i = head_; i < end; ++i) {
        const Access& a = window_[i];
        const std::uint32_t bit = 1u << a.addr.bank;
        if (seen & bit) continue;
        seen |= bit;
        const auto& b = state.bank(rank_, a.addr.bank);
        if (b.is_open() && static_cast<std::uint32_t>(b.open_row) == a.addr.row) continue;
        if (sig.pending_banks & bit) continue;  // host requests own this bank for now
        const DramCommand c{b.is_open() ? CommandKind::PRE : CommandKind::ACT, a.addr, Source::Nda, now};
        if (state.can_issue(c)) {
            issue(c, state, now);
            return c;
        }
    }
    return std::nullopt;
}

PePhase NdaFsm::phase() const {
    if (!stream_) return queue_.empty() ? PePhase::Done : PePhase::StreamX;
    if (write_phase_) return PePhase::WriteBack;
    if (head_ >= window_.size()) return PePhase::StreamX;
    const Access& a = window_[head_];
    if (a.kind == CommandKind::WR) return PePhase::WriteBack;
    const std::uint8_t x = stream_->instruction().op == Opcode::GEMV ? 1 : 0;
    return a.operand == x ? PePhase::StreamX : PePhase::ReadExec;
}

std::uint64_t NdaFsm::batch() const {
    if (!stream_) return 0;
    const std::int64_t seq = base_seq_ + static_cast<std::int64_t>(head_);
    std::uint64_t b = 0;
    for (auto s0 : batch_starts_) {
        if (s0 > seq) break;
        ++b;
    }
    return b == 0 ? 0 : b - 1;
}

bool NdaFsm::same_registers(const NdaFsm& o) const {
    if (channel_ != o.channel_ || rank_ != o.rank_ || wb_ != o.wb_ || write_phase_ != o.write_phase_ ||
        counter_ != o.counter_ || next_batch_ != o.next_batch_ || cur_id_ != o.cur_id_ ||
        stream_.has_value() != o.stream_.has_value() || queue_.size() != o.queue_.size()) {
        return false;
    }
    if (base_seq_ + static_cast<std::int64_t>(head_) != o.base_seq_ + static_cast<std::int64_t>(o.head_)) return false;
    for (std::size_t i = 0; i < queue_.size(); ++i) {
        if (queue_[i].id != o.queue_[i].id || queue_[i].active_at != o.queue_[i].active_at) return false;
    }
    return true;
}

}  // namespace ndasim

#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "ndasim/allocator.hpp"
#include "ndasim/energy.hpp"
#include "ndasim/host_mc.hpp"
#include "ndasim/layout.hpp"
#include "ndasim/nda.hpp"
#include "ndasim/nda_fsm.hpp"
#include "ndasim/replication.hpp"
#include "ndasim/sim_config.hpp"
#include "ndasim/stats.hpp"
#include "ndasim/traffic.hpp"

namespace ndasim {

using Ticket = std::uint64_t;

class KernelDriver;

/// Whole-system simulation: per channel one host controller with its global
/// state table, per rank one NDA and its host-side replica, the functional
/// backing store and the energy ledger. Everything advances one DRAM cycle
/// per step() in a fixed order:
///   1. runtime packets and host traffic enter the controller queues;
///   2. each controller schedules one command against its table, which is
///      applied to both the devices and the table;
///   3. every NDA steps against the devices and its replica against the table,
///      both seeing the hint and pending-bank signals registered last cycle;
///   4. the controllers compute next cycle's signals.
class System {
public:
    explicit System(const SimConfig& cfg);
    ~System();
    System(const System&) = delete;
    System& operator=(const System&) = delete;

    const SimConfig& config() const { return cfg_; }
    const AddressMapper& mapper() const { return mapper_; }
    const NdaLayout& layout() const { return layout_; }
    BackingStore& memory() { return memory_; }
    /// Pool NDA operands are allocated from: the reserved banks when the
    /// mapping is partitioned, otherwise host color `color`.
    Region& operand_region(std::uint32_t color = 0);
    Cycle now() const { return now_; }

    /// Sends one instruction in one launch packet. The functional effect is
    /// applied to the backing store immediately when `functional` is set;
    /// timing follows from the packet and the NDA's access stream.
    Ticket launch(const NdaInstruction& in, bool functional = true);
    /// One packet per channel carries the whole loop; each rank consumes its
    /// instructions independently.
    Ticket launch_macro(const std::vector<NdaInstruction>& loop, bool functional = true);
    /// Runtime-issued host transactions (polling, reductions, data exchange).
    Ticket host_access(const std::vector<PhysicalAddress>& addrs, TxnKind kind);

    bool done(Ticket t) const;
    Cycle finished_at(Ticket t) const;
    /// Lane partials of each instruction of an NDA ticket, in launch order.
    const std::vector<LanePartials>& partials(Ticket t) const;

    struct Reduction {
        std::vector<double> values;  // DOT: 1 sum; NRM2: 1 norm; GEMV: one value per row per instruction
        Ticket reads = 0;            // host reads that fetch the partials
    };
    /// Reduces a completed functional ticket in rank-major, chip-major, lane
    /// order and issues the host reads that fetch the partials.
    Reduction reduce_partials(Ticket t);

    void step();
    void run_for(Cycle n);
    /// Steps until the ticket completes; throws Error after `limit` cycles.
    void run_until(Ticket t, Cycle limit = INT64_MAX / 4);
    /// Runs the configured number of cycles with the configured workloads.
    StatsReport run();

    StatsReport report() const;
    const std::vector<DramCommand>& command_log() const { return log_; }
    const ReplicaLog& replica_log() const { return replica_log_; }
    SyncReport verify() const { return verify_sync(replica_log_); }
    /// Host traffic transactions as they entered the controllers.
    const std::vector<TraceRecord>& transaction_trace() const { return txn_trace_; }
    const EnergyLedger& energy() const { return ledger_; }
    std::uint64_t audit() const;

    /// Negative control: flips the outcome of the replica's coin draw `index`.
    void corrupt_replica_draw(std::uint32_t channel, std::uint32_t rank, std::uint64_t index);

    NdaFsm& nda(std::uint32_t channel, std::uint32_t rank) { return unit(channel, rank).nda; }
    NdaFsm& replica(std::uint32_t channel, std::uint32_t rank) { return unit(channel, rank).replica; }
    HostController& host(std::uint32_t channel) { return mcs_[channel]; }
    const ChannelState& device_state(std::uint32_t channel) const { return truth_[channel]; }
    const ChannelState& table_state(std::uint32_t channel) const { return table_[channel]; }

    /// Control register block of a rank's NDA (last row of bank 0).
    PhysicalAddress control_address(std::uint32_t channel, std::uint32_t rank, std::uint32_t column = 0) const;

private:
    struct RankUnit {
        RankUnit(std::uint32_t ch, std::uint32_t r, const AddressMapper& m, const TimingParams& tp, const NdaPolicy& p)
            : nda(ch, r, m, tp, p), replica(ch, r, m, tp, p) {}
        NdaFsm nda;
        NdaFsm replica;
        IssueSignals sig;
        std::optional<CommandKind> last_column;
    };
    struct TicketState {
        bool nda = true;
        std::uint32_t outstanding = 0;
        Cycle issued = 0;
        Cycle done_at = 0;
        std::vector<NdaInstruction> instrs;
        std::vector<LanePartials> partials;
    };
    struct Request {
        bool packet = false;
        Ticket ticket = 0;
        std::vector<std::pair<NdaInstruction, std::uint64_t>> instrs;
    };
    struct InstrRecord {
        Ticket ticket;
        std::uint64_t fma;
    };

    RankUnit& unit(std::uint32_t ch, std::uint32_t r) { return units_[ch * cfg_.geometry.ranks + r]; }
    void feed(std::uint32_t ch);
    void account(const DramCommand& c);
    void on_complete(const Transaction& t);
    void drain_unit(std::size_t i);
    Transaction make_txn(TxnKind kind, PhysicalAddress paddr, std::int64_t tag) const;

    SimConfig cfg_;
    AddressMapper mapper_;
    NdaLayout layout_;
    BackingStore memory_;
    std::vector<Region> regions_;
    std::optional<Region> shared_region_;

    std::vector<ChannelState> truth_;
    std::vector<ChannelState> table_;
    std::vector<HostController> mcs_;
    std::vector<RankUnit> units_;
    std::vector<std::deque<Transaction>> runtime_q_;
    std::unique_ptr<TrafficGenerator> traffic_;
    std::vector<std::optional<Transaction>> held_;
    std::vector<std::deque<Transaction>> trace_q_;
    std::unique_ptr<KernelDriver> driver_;

    std::vector<TicketState> tickets_;
    std::vector<Request> requests_;
    std::vector<InstrRecord> instrs_;

    Cycle now_ = 0;
    std::vector<DramCommand> log_;
    ReplicaLog replica_log_;
    std::vector<TraceRecord> txn_trace_;
    EnergyLedger ledger_;

    std::array<std::uint64_t, 5> host_cmds_{};
    std::array<std::uint64_t, 5> nda_cmds_{};
    std::vector<std::uint64_t> host_rank_bursts_;
    std::vector<std::optional<CommandKind>> host_last_column_;
    std::uint64_t rank_turnarounds_ = 0;
    std::uint64_t host_turnarounds_ = 0;
    std::uint64_t launch_packets_ = 0;
    std::uint64_t host_reads_ = 0;
    std::uint64_t host_writes_ = 0;
    std::vector<Cycle> read_latencies_;
};

}  // namespace ndasim

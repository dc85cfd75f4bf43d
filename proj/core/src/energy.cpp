#include "ndasim/energy.hpp"

#include <cmath>

#include "ndasim/errors.hpp"

namespace ndasim {

namespace {

constexpr double kBitsPerBurst = kBlockBytes * 8.0;

std::int64_t to_fj(double joules_scaled) { return static_cast<std::int64_t>(std::llround(joules_scaled)); }

}  // namespace

void EnergyParams::validate() const {
    const std::pair<const char*, double> fields[] = {
        {"energy.act_nj", act_nj},
        {"energy.pe_rw_pj_per_bit", pe_rw_pj_per_bit},
        {"energy.host_rw_pj_per_bit", host_rw_pj_per_bit},
        {"energy.fma_pj", fma_pj},
        {"energy.buffer_access_pj", buffer_access_pj},
        {"energy.buffer_leak_mw", buffer_leak_mw},
        {"energy.scratch_leak_mw", scratch_leak_mw},
    };
    for (const auto& [k, v] : fields) {
        if (!(v >= 0.0)) throw ConfigError(k, "must be non-negative");
    }
    if (!(clock_ghz > 0.0)) throw ConfigError("energy.clock_ghz", "must be positive");
}

EnergyParams EnergyParams::from_config(const KeyValueConfig& kv) {
    EnergyParams p;
    p.act_nj = kv.get_double("energy.act_nj", p.act_nj);
    p.pe_rw_pj_per_bit = kv.get_double("energy.pe_rw_pj_per_bit", p.pe_rw_pj_per_bit);
    p.host_rw_pj_per_bit = kv.get_double("energy.host_rw_pj_per_bit", p.host_rw_pj_per_bit);
    p.fma_pj = kv.get_double("energy.fma_pj", p.fma_pj);
    p.buffer_access_pj = kv.get_double("energy.buffer_access_pj", p.buffer_access_pj);
    p.buffer_leak_mw = kv.get_double("energy.buffer_leak_mw", p.buffer_leak_mw);
    p.scratch_leak_mw = kv.get_double("energy.scratch_leak_mw", p.scratch_leak_mw);
    p.clock_ghz = kv.get_double("energy.clock_ghz", p.clock_ghz);
    p.validate();
    return p;
}

std::string_view to_string(EnergyEvent e) {
    switch (e) {
        case EnergyEvent::Act: return "act";
        case EnergyEvent::HostBurst: return "host_burst";
        case EnergyEvent::PeBurst: return "pe_burst";
        case EnergyEvent::Fma: return "fma";
        case EnergyEvent::BufferAccess: return "buffer_access";
    }
    return "?";
}

EnergyLedger::EnergyLedger(const EnergyParams& p, std::uint32_t pe_count) : params_(p), pe_count_(pe_count) {
    p.validate();
    unit_fj_[static_cast<std::size_t>(EnergyEvent::Act)] = to_fj(p.act_nj * 1e6);
    unit_fj_[static_cast<std::size_t>(EnergyEvent::HostBurst)] = to_fj(p.host_rw_pj_per_bit * kBitsPerBurst * 1e3);
    unit_fj_[static_cast<std::size_t>(EnergyEvent::PeBurst)] = to_fj(p.pe_rw_pj_per_bit * kBitsPerBurst * 1e3);
    unit_fj_[static_cast<std::size_t>(EnergyEvent::Fma)] = to_fj(p.fma_pj * 1e3);
    unit_fj_[static_cast<std::size_t>(EnergyEvent::BufferAccess)] = to_fj(p.buffer_access_pj * 1e3);
}

void EnergyLedger::add(EnergyEvent e, std::uint64_t count) { counts_[static_cast<std::size_t>(e)] += count; }

std::int64_t EnergyLedger::event_fj() const {
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < kEnergyEventKinds; ++i) sum += unit_fj_[i] * static_cast<std::int64_t>(counts_[i]);
    return sum;
}

double EnergyLedger::leakage_nj() const {
    // mW * ns = pJ; cycles / GHz = ns.
    const double seconds_ns = static_cast<double>(elapsed_) / params_.clock_ghz;
    return (params_.buffer_leak_mw + params_.scratch_leak_mw) * pe_count_ * seconds_ns * 1e-3;
}

double EnergyLedger::average_power_mw() const {
    if (elapsed_ <= 0) return 0.0;
    const double ns = static_cast<double>(elapsed_) / params_.clock_ghz;
    return total_nj() / ns * 1e3;
}

EnergyLedger& energy_account(EnergyLedger& ledger, EnergyEvent e, std::uint64_t count) {
    ledger.add(e, count);
    return ledger;
}

}  // namespace ndasim

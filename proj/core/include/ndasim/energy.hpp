#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "ndasim/kvconfig.hpp"
#include "ndasim/types.hpp"

namespace ndasim {

/// Per-event energy constants. Units follow the DDR4/PE energy table.
struct EnergyParams {
    double act_nj = 1.0;             // per ACT
    double pe_rw_pj_per_bit = 11.3;  // NDA-side RD/WR
    double host_rw_pj_per_bit = 25.7;
    double fma_pj = 20.0;            // per FMA op
    double buffer_access_pj = 20.0;  // per buffer/scratchpad access
    double buffer_leak_mw = 11.0;    // per 1KB buffer, per PE
    double scratch_leak_mw = 11.0;   // per 1KB scratchpad, per PE
    double clock_ghz = 1.2;

    void validate() const;
    static EnergyParams from_config(const KeyValueConfig& kv);
};

enum class EnergyEvent : std::uint8_t { Act, HostBurst, PeBurst, Fma, BufferAccess };
inline constexpr std::size_t kEnergyEventKinds = 5;
std::string_view to_string(EnergyEvent e);

/// Event energies are held as integer femtojoules so that event sums are exact;
/// leakage is a separate term proportional to elapsed cycles.
class EnergyLedger {
public:
    explicit EnergyLedger(const EnergyParams& p = {}, std::uint32_t pe_count = 0);

    void add(EnergyEvent e, std::uint64_t count = 1);
    void set_elapsed(Cycle cycles) { elapsed_ = cycles; }

    std::uint64_t count(EnergyEvent e) const { return counts_[static_cast<std::size_t>(e)]; }
    std::int64_t unit_fj(EnergyEvent e) const { return unit_fj_[static_cast<std::size_t>(e)]; }
    /// Sum of per-event energies in femtojoules (exact).
    std::int64_t event_fj() const;
    double event_nj() const { return static_cast<double>(event_fj()) * 1e-6; }
    double leakage_nj() const;
    double total_nj() const { return event_nj() + leakage_nj(); }
    /// Average power over the elapsed window in milliwatts (0 when no time passed).
    double average_power_mw() const;
    Cycle elapsed() const { return elapsed_; }
    const EnergyParams& params() const { return params_; }

private:
    EnergyParams params_;
    std::uint32_t pe_count_ = 0;
    std::array<std::int64_t, kEnergyEventKinds> unit_fj_{};
    std::array<std::uint64_t, kEnergyEventKinds> counts_{};
    Cycle elapsed_ = 0;
};

/// Free-function form.
EnergyLedger& energy_account(EnergyLedger& ledger, EnergyEvent e, std::uint64_t count = 1);

}  // namespace ndasim

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ndasim {

/// All simulated time is counted in DRAM command-clock cycles.
using Cycle = std::int64_t;

inline constexpr Cycle kNever = INT64_MIN / 4;

/// Bytes moved by one RD/WR burst across a rank (8 chips x 8 bytes).
inline constexpr std::uint32_t kBlockBytes = 64;
inline constexpr std::uint32_t kChipBytesPerBurst = 8;

struct Geometry {
    std::uint32_t channels = 2;
    std::uint32_t ranks = 2;          // per channel
    std::uint32_t banks = 16;         // per rank
    std::uint32_t bank_groups = 2;    // banks are split into groups by their high index bits
    std::uint32_t rows = 65536;       // per bank
    std::uint32_t columns = 128;      // 64B blocks per row (1KB per chip)
    std::uint32_t chips = 8;          // per rank, one PE each

    std::uint32_t banks_per_group() const { return banks / bank_groups; }
    std::uint32_t group_of(std::uint32_t bank) const { return bank / banks_per_group(); }
    std::uint64_t row_bytes() const { return std::uint64_t{columns} * kBlockBytes; }
    std::uint64_t total_banks() const { return std::uint64_t{channels} * ranks * banks; }
    std::uint64_t capacity() const { return total_banks() * rows * row_bytes(); }
    std::uint32_t rank_count() const { return channels * ranks; }

    bool operator==(const Geometry&) const = default;
};

struct DramAddress {
    std::uint32_t channel = 0;
    std::uint32_t rank = 0;
    std::uint32_t bank = 0;
    std::uint32_t row = 0;
    std::uint32_t column = 0;

    bool operator==(const DramAddress&) const = default;
};

std::string to_string(const DramAddress& a);

enum class CommandKind : std::uint8_t { ACT, PRE, PREA, RD, WR };
enum class Source : std::uint8_t { Host, Nda };

std::string_view to_string(CommandKind k);
CommandKind parse_command_kind(std::string_view s);

inline bool is_column(CommandKind k) { return k == CommandKind::RD || k == CommandKind::WR; }
inline bool is_row(CommandKind k) { return !is_column(k); }

struct DramCommand {
    CommandKind kind = CommandKind::ACT;
    DramAddress target;
    Source source = Source::Host;
    Cycle issue_cycle = 0;

    bool operator==(const DramCommand&) const = default;
};

}  // namespace ndasim

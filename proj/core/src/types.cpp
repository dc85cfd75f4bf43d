#include "ndasim/types.hpp"

#include "ndasim/errors.hpp"

namespace ndasim {

std::string to_string(const DramAddress& a) {
    return "(ch" + std::to_string(a.channel) + " rk" + std::to_string(a.rank) + " bk" + std::to_string(a.bank) +
           " row" + std::to_string(a.row) + " col" + std::to_string(a.column) + ")";
}

std::string_view to_string(CommandKind k) {
    switch (k) {
        case CommandKind::ACT: return "ACT";
        case CommandKind::PRE: return "PRE";
        case CommandKind::PREA: return "PREA";
        case CommandKind::RD: return "RD";
        case CommandKind::WR: return "WR";
    }
    return "?";
}

CommandKind parse_command_kind(std::string_view s) {
    if (s == "ACT") return CommandKind::ACT;
    if (s == "PRE") return CommandKind::PRE;
    if (s == "PREA") return CommandKind::PREA;
    if (s == "RD") return CommandKind::RD;
    if (s == "WR") return CommandKind::WR;
    throw Error("unknown command kind '" + std::string(s) + "'");
}

}  // namespace ndasim

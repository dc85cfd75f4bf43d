#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ndasim/dram.hpp"

namespace ndasim {

struct Violation {
    DramCommand command;
    std::string rule;
    std::int64_t deficit = 0;
};

/// Replays a command log (sorted by issue cycle) against an independent
/// pairwise formulation of the DDR4 rules and reports every violation.
/// An empty result means the log is protocol-clean.
std::vector<Violation> audit_log(std::span<const DramCommand> log, const TimingParams& params,
                                 const Geometry& geometry = Geometry{});

// Command-log text format, one record per line:
//   cycle,source(H|N),kind,channel,rank,bank,row,column
void write_command_log(std::ostream& os, std::span<const DramCommand> log);
std::vector<DramCommand> read_command_log(std::istream& is);
std::string format_command(const DramCommand& cmd);

}  // namespace ndasim

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sasv {

/// Entry point of the `sasv` tool. `args` excludes the program name.
/// Summaries go to `out`, diagnostics to `err`; returns the exit status.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace sasv

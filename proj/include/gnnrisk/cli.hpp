#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gnnrisk {

/// Runs the command-line tool with `args` (program name excluded). Returns
/// the process exit code: 0 success, 2 input or configuration error,
/// 3 numeric failure, 4 evaluation or calibration error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gnnrisk

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qpanel {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_invalid_arguments = 2,
    exit_data_error = 3,
    exit_numerical_failure = 4,
};

/// Runs the command line `args` (program name excluded), e.g.
/// {"estimate", "--input", "panel.csv", "--tau", "0.5"}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qpanel

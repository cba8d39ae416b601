#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace disagree::cli {

/// Runs one command line (args exclude the program name). Results go to
/// `out`, structured log events to `log`. Returns 0 on success, 1 on
/// validation errors and 2 on internal failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log);

}  // namespace disagree::cli

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace convo::cli {

/// Runs the `convo` command line. `args` excludes the program name. Returns
/// 0 on success, 2 on a usage error and 1 on a component failure, in which
/// case one JSON error record is written to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace convo::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace relerr::cli {

// Runs the command line `args` (args[0] is the program name). Returns the
// process exit code: 0 iff every requested artifact was written.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace relerr::cli

#ifndef PIPF_TOOLS_COMMANDS_HPP
#define PIPF_TOOLS_COMMANDS_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace pipf::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kInternalError = 3 };

/// Entry point shared by the executable and the tests. argv[0] is the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pipf::cli

#endif  // PIPF_TOOLS_COMMANDS_HPP

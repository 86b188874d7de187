#ifndef PATCHFORGE_TOOLS_CLI_HPP_
#define PATCHFORGE_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace patchforge::cli {

enum ExitCode : int { kOk = 0, kAssertionFailed = 1, kUsageError = 2, kRuntimeError = 3 };

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace patchforge::cli

#endif  // PATCHFORGE_TOOLS_CLI_HPP_

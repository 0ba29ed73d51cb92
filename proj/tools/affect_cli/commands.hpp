#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace affect::cli {

/// Bad flag values detected after parsing; maps to exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs one invocation. `args` excludes the program name.
/// Returns 0 on success, 1 on runtime failure, 2 on usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Expands `--config FILE` into `--key=value` arguments placed right after the
/// subcommand, so explicit flags (which come later) win.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace affect::cli

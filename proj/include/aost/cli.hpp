#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "aost/config.hpp"

namespace aost {

inline constexpr const char* kToolVersion = "aost 0.1.0";

/// Exit statuses of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

/// Commands accepted by dispatch, in pipeline order.
const std::vector<std::string>& command_names();

/// Runs one command against a parsed config. Progress goes to `log`, errors
/// to `err`. Holds `<workdir>/.aost.lock` for the duration of the command.
int dispatch(const std::string& command, const RunConfig& config, std::ostream& log,
             std::ostream& err);

/// Entry point behind the `aost` executable: parses arguments, the config
/// file and environment, then dispatches.
int run_cli(int argc, char** argv);

}  // namespace aost

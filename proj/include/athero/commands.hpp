#pragma once

// Command dispatch for the CLI: each command solves, then writes a manifest
// and CSV artifacts into the configured output directory.

#include "athero/config.hpp"

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace athero::cli {

enum ExitCode : int { kSuccess = 0, kSolverFailure = 1, kInvalidInput = 2 };

const std::vector<std::string>& command_names();

/// Runs one command. Never throws: failures are written to error.json in
/// cfg.out and reflected in the exit code. Progress lines go to log.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log);

/// Exit code for an exception escaping a solver or the config layer.
int exit_code_for(const std::exception& e);

/// Writes <dir>/error.json describing e; returns the exit code.
int write_error(const std::string& dir, const std::string& command, const std::exception& e);

}  // namespace athero::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "evidistill/error.hpp"
#include "evidistill/pipeline.hpp"

namespace evidistill::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitMissingInput = 2;
inline constexpr int kExitConfigInvalid = 3;
inline constexpr int kExitBudgetExhausted = 4;

int exit_code_for(ErrorCode code);

struct ParsedCommand {
  std::string subcommand;
  PipelineConfig config;
  bool fresh = false;   // elicit: drop persisted rationales first
  bool resume = false;  // eval: keep the existing per-instance log
  std::string from_counts;
  std::vector<std::string> inputs;
  std::string output;
  double scale = 0.0;  // compare: 0 picks 100 for fractional inputs
};

// Parses flags, the optional --config file and defaults, in that order of
// precedence. Throws Error(ConfigInvalid) on bad values.
ParsedCommand parse_command_line(const std::vector<std::string>& args);

// args[0] is the program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "1..10" or "1,2,5"
std::vector<std::size_t> parse_grid(const std::string& grid);

}  // namespace evidistill::cli

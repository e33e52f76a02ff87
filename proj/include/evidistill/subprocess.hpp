#pragma once

#include <chrono>
#include <string>
#include <vector>

namespace evidistill {

struct ProcessResult {
  int exit_code = -1;
  std::string standard_output;
  std::string standard_error;
  bool timed_out = false;
};

// Runs argv[0] (PATH lookup) and captures both streams. The child is killed
// when `timeout` elapses. Throws std::system_error when the spawn fails.
ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::duration<double> timeout);

}  // namespace evidistill

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace evidistill::log {

enum class Level { Info, Warn, Error };

using Sink = std::function<void(Level, std::string_view)>;

void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

// Replaces the process-wide sink; returns the previous one. The default sink
// writes to stderr.
Sink set_sink(Sink sink);

// Collects warnings for the lifetime of the object (tests use this to
// observe degradation paths).
class CaptureWarnings {
 public:
  CaptureWarnings();
  ~CaptureWarnings();
  CaptureWarnings(const CaptureWarnings&) = delete;
  CaptureWarnings& operator=(const CaptureWarnings&) = delete;

  std::vector<std::string> messages() const;
  bool contains(std::string_view needle) const;

 private:
  Sink previous_;
  struct State;
  std::shared_ptr<State> state_;
};

}  // namespace evidistill::log

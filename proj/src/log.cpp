#include "evidistill/log.hpp"

#include <iostream>
#include <mutex>

namespace evidistill::log {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink = [](Level level, std::string_view message) {
    static constexpr const char* kNames[] = {"info", "warn", "error"};
    std::cerr << "[evidistill " << kNames[static_cast<int>(level)] << "] " << message << '\n';
  };
  return sink;
}

void emit(Level level, std::string_view message) {
  Sink sink;
  {
    std::lock_guard lock(sink_mutex());
    sink = current_sink();
  }
  if (sink) sink(level, message);
}

}  // namespace

void info(std::string_view message) { emit(Level::Info, message); }
void warn(std::string_view message) { emit(Level::Warn, message); }
void error(std::string_view message) { emit(Level::Error, message); }

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  Sink previous = std::move(current_sink());
  current_sink() = std::move(sink);
  return previous;
}

struct CaptureWarnings::State {
  mutable std::mutex mutex;
  std::vector<std::string> messages;
};

CaptureWarnings::CaptureWarnings() : state_(std::make_shared<State>()) {
  previous_ = set_sink([state = state_](Level level, std::string_view message) {
    if (level == Level::Info) return;
    std::lock_guard lock(state->mutex);
    state->messages.emplace_back(message);
  });
}

CaptureWarnings::~CaptureWarnings() {
  set_sink(std::move(previous_));
}

std::vector<std::string> CaptureWarnings::messages() const {
  std::lock_guard lock(state_->mutex);
  return state_->messages;
}

bool CaptureWarnings::contains(std::string_view needle) const {
  for (const auto& m : messages()) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace evidistill::log

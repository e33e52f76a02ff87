#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evidistill/cache.hpp"
#include "evidistill/prompt.hpp"
#include "evidistill/request_gate.hpp"
#include "evidistill/retry.hpp"
#include "evidistill/types.hpp"

namespace evidistill {

struct TeacherEndpoint {
  // "mock" or "chat_completion"
  std::string kind = "mock";
  std::string url = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "EVIDISTILL_TEACHER_API_KEY";
  double timeout_seconds = 120.0;
};

struct TeacherConfig {
  TeacherEndpoint endpoint;
  std::string model_id = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_output_tokens = 1024;
  RetryPolicy retry;
  // Cap on requests sent to the endpoint (every attempt counts).
  std::optional<std::size_t> cost_budget;
  std::size_t parallelism = 4;

  // Throws ConfigInvalid.
  void validate() const;
};

// Chat-completion style endpoint: one prompt in, plain text out. Throws
// EndpointFailure on transport or HTTP errors.
class TeacherClient {
 public:
  virtual ~TeacherClient() = default;
  virtual std::string id() const = 0;
  virtual std::string complete(const std::string& prompt, const TeacherConfig& config) = 0;
};

// POSTs {"model", "messages": [{"role": "user", ...}], "temperature",
// "max_tokens"} and returns choices[0].message.content. The bearer token is
// read from the endpoint's api_key_env when set.
std::unique_ptr<TeacherClient> make_chat_completion_client(const TeacherEndpoint& endpoint);

// Offline stand-in. Reads the gold label from the prompt's label line and
// names the first fine-grained label offered for it. Never emits the
// terminal sentence itself.
std::unique_ptr<TeacherClient> make_mock_teacher();

std::unique_ptr<TeacherClient> make_function_teacher(std::string id,
                                                     std::function<std::string(const std::string&)> fn);

std::unique_ptr<TeacherClient> make_teacher_client(const TeacherConfig& config);

// Ensures the text closes with the terminal-label sentence for `gold`.
// Throws LabelConflict when it already closes with one for another label.
std::string append_label_suffix(std::string_view raw_output, StandardLabel gold);

class RationaleElicitor {
 public:
  RationaleElicitor(TeacherConfig config, std::shared_ptr<TeacherClient> client, std::shared_ptr<RequestGate> gate,
                    std::shared_ptr<ResponseCache> cache, Sleeper sleeper = real_sleeper());

  const TeacherConfig& config() const { return config_; }
  const TeacherClient& client() const { return *client_; }

  // Renders the labeling prompt for (x, gold) as given (evidence is not
  // capped here), queries the teacher and fixes up the ending. Throws
  // EndpointFailure, BudgetExhausted, EmptyCompletion or LabelConflict.
  RationaleRecord elicit_rationale(const ProcessedInstance& x, StandardLabel gold);

  // Raw completion for a rendered prompt, through cache, budget and retries.
  std::string complete(const std::string& prompt, const std::string& fingerprint);

  // Builds the record from a completion; throws LabelConflict.
  RationaleRecord make_record(const ProcessedInstance& x, StandardLabel gold, const RenderedPrompt& prompt,
                              std::string_view raw) const;

  std::size_t requests_spent() const;

 private:
  void spend();

  TeacherConfig config_;
  std::shared_ptr<TeacherClient> client_;
  std::shared_ptr<RequestGate> gate_;
  std::shared_ptr<ResponseCache> cache_;
  Sleeper sleeper_;
  mutable std::mutex mutex_;
  std::size_t spent_ = 0;
};

struct ElicitationItem {
  ProcessedInstance instance;
  StandardLabel gold = StandardLabel::Unverified;
};

struct BatchReport {
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::size_t quarantined = 0;
  std::size_t skipped = 0;
  std::size_t requests_spent = 0;
  bool budget_exhausted = false;
  std::vector<std::string> failures;
};

struct BatchPaths {
  std::filesystem::path rationales;
  std::filesystem::path quarantine;
};

// Appends one line per item to the rationale file (or the quarantine file on
// LabelConflict), in input order. With resume, ids present in either file
// are skipped; without it both files are truncated first. Only
// BudgetExhausted stops the batch early.
BatchReport run_elicitation_batch(std::span<const ElicitationItem> items, RationaleElicitor& elicitor,
                                  const BatchPaths& paths, bool resume);

}  // namespace evidistill

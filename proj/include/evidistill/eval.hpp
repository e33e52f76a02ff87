#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evidistill/dataset.hpp"
#include "evidistill/types.hpp"

namespace evidistill {

// nullopt is a parse failure.
using Prediction = std::optional<StandardLabel>;

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  double accuracy = 0.0;
  // Unweighted means over classes with gold support > 0.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::array<ClassMetrics, 3> per_class{};  // indexed by label code
  double parse_failure_rate = 0.0;
  std::size_t n = 0;

  const ClassMetrics& of(StandardLabel label) const { return per_class[to_code(label)]; }
};

// Throws LengthMismatch or EmptyInput.
Metrics compute_metrics(std::span<const StandardLabel> golds, std::span<const Prediction> preds);

// "metric\tvalue" rows plus per-class rows.
std::string render_metrics_tsv(const Metrics& m);
std::string render_metrics_text(const Metrics& m);

struct ModelRequest {
  std::string post_id;
  std::string prompt;
  // Relative image path when the student is multimodal.
  std::optional<std::string> image;
};

// Prompt (plus optional image reference) in, completion text out. Any
// evidistill::Error is treated as a failed request.
class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string id() const = 0;
  virtual std::string complete(const ModelRequest& request) = 0;
};

// Answers with the target of the record whose instruction matches the
// prompt, falling back to the record with the same post_id.
std::unique_ptr<ModelClient> make_echo_client(std::span<const InstructionRecord> records);
std::unique_ptr<ModelClient> make_constant_client(std::string completion);
std::unique_ptr<ModelClient> make_scripted_client(std::string id,
                                                  std::function<std::string(const ModelRequest&)> script);
// Chat-completion endpoint (same wire format as the teacher).
std::unique_ptr<ModelClient> make_chat_model_client(std::string url, std::string model_id,
                                                    std::string api_key_env, double timeout_seconds = 120.0);
// Student server: POST {"prompt", "image"} -> {"completion"}.
std::unique_ptr<ModelClient> make_student_http_client(std::string url, double timeout_seconds = 120.0);

struct EvalItem {
  ProcessedInstance instance;
  StandardLabel gold = StandardLabel::Unverified;
  std::optional<std::string> image;
};

struct EvalConfig {
  std::size_t max_textual = 3;
  std::size_t max_visual = 3;
  std::size_t max_item_chars = 500;
  AblationKind ablation = AblationKind::Full;
  bool include_image = false;
  std::size_t parallelism = 4;
  // The run aborts with ClientUnavailable when this many leading requests
  // all fail.
  std::size_t availability_probe = 8;
};

struct EvalLogEntry {
  std::string post_id;
  std::string prompt_fingerprint;
  std::string raw_output;
  Prediction extracted;
  StandardLabel gold = StandardLabel::Unverified;
  std::string error;
};

struct EvalResult {
  Metrics metrics;
  std::vector<EvalLogEntry> log;  // input order
};

// The inference prompt for an item under the config's caps and ablation.
std::string eval_prompt(const ProcessedInstance& x, const EvalConfig& config);

// Queries the client once per item and scores the extracted labels. With a
// log path, each entry is appended as it completes; with resume, items
// already in the log are not queried again. Throws EmptyInput or
// ClientUnavailable.
EvalResult evaluate(ModelClient& client, std::span<const EvalItem> items, const EvalConfig& config,
                    const std::optional<std::filesystem::path>& log_path = std::nullopt, bool resume = false);

// Metrics from a per-instance log without re-querying.
Metrics rescore_log(const std::filesystem::path& log_path);

struct SweepPoint {
  std::size_t m = 0;
  std::size_t n = 0;
  Metrics metrics;
};

// One evaluate run per (m, n) in textual_grid x visual_grid. Throws
// ConfigInvalid on an empty grid.
std::vector<SweepPoint> evidence_count_sweep(ModelClient& client, std::span<const EvalItem> items,
                                             std::span<const std::size_t> textual_grid,
                                             std::span<const std::size_t> visual_grid, EvalConfig config = {});

// "m\tn\ttotal\taccuracy\tprecision\trecall\tf1\tparse_failure_rate"
std::string render_sweep_tsv(std::span<const SweepPoint> points);

struct ResultRow {
  std::string name;
  // accuracy, precision, recall, f1 on whatever scale the source used
  std::array<double, 4> values{};
};

ResultRow result_row(std::string name, const Metrics& m);

struct ComparisonTable {
  std::vector<ResultRow> rows;
  // Per column: index of the best and second-best row. Ties go to the
  // earlier row.
  std::array<std::size_t, 4> best{};
  std::array<std::optional<std::size_t>, 4> second{};

  enum class Flag { None, Best, Second };
  Flag flag(std::size_t row, std::size_t column) const;
};

// Throws EmptyInput with fewer than two rows.
ComparisonTable compare_ablations(std::vector<ResultRow> rows);

// Aligned text; best cells as **x**, second-best as _x_. `scale` multiplies
// values before printing with two decimals.
std::string render_comparison(const ComparisonTable& table, double scale = 1.0);
std::string render_comparison_tsv(const ComparisonTable& table);

// "name\taccuracy\tprecision\trecall\tf1" rows (header optional).
std::vector<ResultRow> parse_result_rows(std::string_view tsv);

}  // namespace evidistill

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evidistill/cache.hpp"
#include "evidistill/dataset.hpp"
#include "evidistill/eval.hpp"
#include "evidistill/request_gate.hpp"
#include "evidistill/retrieval.hpp"
#include "evidistill/teacher.hpp"
#include "evidistill/visual.hpp"

namespace evidistill {

// Workspace layout:
//   posts/posts.jsonl                 input posts; image paths relative to posts/
//   cache/                            raw external responses
//   instances/visual.jsonl            OCR + caption per post
//   instances/instances.jsonl         processed instances, evidence uncapped
//   rationales/rationales.jsonl       teacher outputs
//   rationales/quarantine.jsonl       label conflicts
//   dataset/<ablation>/records.jsonl  instruction records
//   dataset/<ablation>/{train,test}.jsonl
//   results/                          metrics, logs, sweeps, stats, plots
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path posts_dir() const { return root / "posts"; }
  std::filesystem::path posts_file() const { return posts_dir() / "posts.jsonl"; }
  std::filesystem::path cache_dir() const { return root / "cache"; }
  std::filesystem::path visual_file() const { return root / "instances" / "visual.jsonl"; }
  std::filesystem::path instances_file() const { return root / "instances" / "instances.jsonl"; }
  std::filesystem::path rationales_file() const { return root / "rationales" / "rationales.jsonl"; }
  std::filesystem::path quarantine_file() const { return root / "rationales" / "quarantine.jsonl"; }
  std::filesystem::path dataset_dir(AblationKind kind) const { return root / "dataset" / std::string(to_string(kind)); }
  std::filesystem::path results_dir() const { return root / "results"; }
};

struct ModelClientSettings {
  // "echo", "constant", "chat_completion" or "student_http"
  std::string kind = "echo";
  std::string url;
  std::string model_id;
  std::string api_key_env = "EVIDISTILL_MODEL_API_KEY";
  std::string constant_text;
  double timeout_seconds = 120.0;
};

struct PipelineConfig {
  std::filesystem::path workspace = ".";
  VisualBackendConfig visual;
  RetrievalConfig retrieval;
  TeacherConfig teacher;
  // Shared limiter for every external request; 0 disables limiting.
  double rate_limit = 0.0;
  double rate_burst = 1.0;
  std::size_t parallelism = 4;

  bool include_image = false;
  AblationKind ablation = AblationKind::Full;
  double test_fraction = 0.1;
  std::uint64_t seed = 13;
  std::filesystem::path split_file;

  ModelClientSettings model;
  std::size_t availability_probe = 8;
  std::vector<std::size_t> sweep_textual = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::size_t> sweep_visual = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  LengthUnit length_unit = LengthUnit::WhitespaceTokens;
  std::size_t bucket_width = 50;

  // Throws ConfigInvalid.
  void validate() const;
};

struct StageReport {
  std::size_t processed = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;
};

struct SplitReport {
  std::size_t train = 0;
  std::size_t test = 0;
};

struct EvalReport {
  EvalResult result;
  std::filesystem::path log_file;
  std::filesystem::path metrics_file;
};

// Every stage reads the previous stage's files and rewrites its own output
// deterministically; external calls go through one gate and one cache, so a
// rerun over unchanged inputs is served from the cache.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  const Workspace& workspace() const { return ws_; }
  const std::shared_ptr<RequestGate>& gate() const { return gate_; }

  std::vector<Post> load_posts() const;

  StageReport augment();
  StageReport retrieve();
  BatchReport elicit(bool resume = true);
  StageReport assemble();
  SplitReport split();
  DatasetStats stats();
  Histogram length_histogram();
  EvalReport eval(bool resume = false);
  std::vector<SweepPoint> sweep();

  std::vector<EvalItem> eval_items() const;
  std::unique_ptr<ModelClient> make_model_client() const;

 private:
  std::unique_ptr<VisualProcessor> make_visual() const;
  std::vector<ProcessedInstance> load_instances() const;
  std::vector<InstructionRecord> load_eval_records() const;

  PipelineConfig config_;
  Workspace ws_;
  std::shared_ptr<RequestGate> gate_;
  std::shared_ptr<ResponseCache> cache_;
};

}  // namespace evidistill

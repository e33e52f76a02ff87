#include "evidistill/pipeline.hpp"

#include <algorithm>
#include <unordered_map>

#include "evidistill/error.hpp"
#include "evidistill/labels.hpp"
#include "evidistill/log.hpp"
#include "evidistill/parallel.hpp"
#include "evidistill/prompt.hpp"
#include "evidistill/serialization.hpp"
#include "evidistill/text.hpp"

namespace evidistill {
namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
  if (workspace.empty()) throw Error(ErrorCode::ConfigInvalid, "workspace is empty");
  if (parallelism == 0) throw Error(ErrorCode::ConfigInvalid, "parallelism must be >= 1");
  if (rate_limit < 0) throw Error(ErrorCode::ConfigInvalid, "rate_limit must be >= 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error(ErrorCode::ConfigInvalid, "test_fraction must lie in (0, 1)");
  if (bucket_width == 0) throw Error(ErrorCode::ConfigInvalid, "bucket_width must be > 0");
  if (sweep_textual.empty() || sweep_visual.empty()) throw Error(ErrorCode::ConfigInvalid, "sweep grid is empty");
  static const char* kClients[] = {"echo", "constant", "chat_completion", "student_http"};
  if (std::find(std::begin(kClients), std::end(kClients), model.kind) == std::end(kClients)) {
    throw Error(ErrorCode::ConfigInvalid, "unknown model client '" + model.kind + "'");
  }
  if ((model.kind == "chat_completion" || model.kind == "student_http") && model.url.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "model client '" + model.kind + "' needs a url");
  }
  retrieval.validate();
  teacher.validate();
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)), ws_{config_.workspace} {
  if (config_.retrieval.cache_dir.empty()) config_.retrieval.cache_dir = ws_.cache_dir();
  config_.validate();
  gate_ = std::make_shared<RequestGate>(config_.rate_limit, config_.rate_burst);
  cache_ = std::make_shared<ResponseCache>(config_.retrieval.cache_dir);
}

std::vector<Post> Pipeline::load_posts() const {
  const auto base = ws_.posts_dir();
  return read_jsonl_as<Post>(ws_.posts_file(), [&](const json& j) { return post_from_json(j, base); });
}

std::unique_ptr<VisualProcessor> Pipeline::make_visual() const {
  return std::make_unique<VisualProcessor>(config_.visual, gate_, cache_);
}

namespace {

struct ItemOutcome {
  std::optional<ojson> line;
  std::string error;
};

// Runs `work` per item with ordered commits, collecting failures into the
// report and writing successful lines to `out` in input order.
template <class T>
StageReport run_stage(const std::vector<T>& items, std::size_t width, const fs::path& out,
                      const std::function<ojson(const T&)>& work, const std::function<std::string(const T&)>& name) {
  StageReport report;
  std::vector<ojson> lines;
  ordered_parallel<ItemOutcome>(
      items.size(), width,
      [&](std::size_t i) {
        ItemOutcome o;
        try {
          o.line = work(items[i]);
        } catch (const Error& e) {
          o.error = name(items[i]) + ": " + e.what();
        }
        return o;
      },
      [&](std::size_t, ItemOutcome& o) {
        if (o.line) {
          lines.push_back(std::move(*o.line));
          ++report.processed;
        } else {
          log::warn(o.error);
          report.failures.push_back(std::move(o.error));
          ++report.failed;
        }
      });
  write_jsonl(out, lines);
  return report;
}

std::unordered_map<std::string, StandardLabel> gold_labels(const std::vector<Post>& posts) {
  std::unordered_map<std::string, StandardLabel> out;
  for (const auto& p : posts) out.emplace(p.id, p.gold_label);
  return out;
}

}  // namespace

StageReport Pipeline::augment() {
  auto posts = load_posts();
  auto dataset_report = validate_posts(posts);
  if (dataset_report.mentions("duplicate id")) {
    throw Error(ErrorCode::SchemaViolation, text::join(dataset_report.problems, "; "));
  }
  auto visual = make_visual();
  return run_stage<Post>(
      posts, config_.parallelism, ws_.visual_file(),
      [&](const Post& post) {
        auto problems = validate_post(post);
        if (!problems.ok()) throw Error(ErrorCode::SchemaViolation, text::join(problems.problems, "; "));
        auto digest = visual->process_visual(post.image);
        ojson j;
        j["post_id"] = post.id;
        j["ocr_text"] = digest.ocr_text;
        j["caption_text"] = digest.caption_text;
        return j;
      },
      [](const Post& p) { return p.id; });
}

StageReport Pipeline::retrieve() {
  auto posts = load_posts();
  std::unordered_map<std::string, VisualDigest> digests;
  for (const auto& j : read_jsonl(ws_.visual_file())) {
    digests[j.at("post_id").get<std::string>()] = {j.value("ocr_text", ""), j.value("caption_text", "")};
  }
  std::vector<Post> ready;
  for (auto& p : posts) {
    if (digests.count(p.id)) ready.push_back(std::move(p));
  }

  EvidenceRetriever retriever(config_.retrieval, make_reverse_image_engine(config_.retrieval.reverse_image),
                              make_image_search_engine(config_.retrieval.text_search), gate_, cache_);
  auto visual = make_visual();
  auto fetcher = make_default_fetcher(ws_.posts_dir(), config_.retrieval.text_search.timeout_seconds);

  return run_stage<Post>(
      ready, config_.parallelism, ws_.instances_file(),
      [&](const Post& post) {
        auto bundle = retriever.retrieve(post, *visual, *fetcher);
        ProcessedInstance x;
        x.post_id = post.id;
        x.text = post.text;
        x.digest = digests.at(post.id);
        x.textual_evidence = std::move(bundle.textual);
        x.visual_evidence = std::move(bundle.visual);
        return to_json(x);
      },
      [](const Post& p) { return p.id; });
}

std::vector<ProcessedInstance> Pipeline::load_instances() const {
  return read_jsonl_as<ProcessedInstance>(ws_.instances_file(), instance_from_json);
}

BatchReport Pipeline::elicit(bool resume) {
  const auto golds = gold_labels(load_posts());
  const auto& r = config_.retrieval;
  std::vector<ElicitationItem> items;
  for (auto& x : load_instances()) {
    auto it = golds.find(x.post_id);
    if (it == golds.end()) continue;
    items.push_back({with_selected_evidence(x, r.max_textual, r.max_visual, r.max_item_chars), it->second});
  }
  auto teacher_cfg = config_.teacher;
  RationaleElicitor elicitor(teacher_cfg, make_teacher_client(teacher_cfg), gate_, cache_);
  return run_elicitation_batch(items, elicitor, {ws_.rationales_file(), ws_.quarantine_file()}, resume);
}

StageReport Pipeline::assemble() {
  const auto posts = load_posts();
  std::unordered_map<std::string, const Post*> post_by_id;
  for (const auto& p : posts) post_by_id[p.id] = &p;

  const auto& r = config_.retrieval;
  std::vector<ProcessedInstance> instances;
  for (auto& x : load_instances()) instances.push_back(with_selected_evidence(x, r.max_textual, r.max_visual, r.max_item_chars));
  std::unordered_map<std::string, const ProcessedInstance*> inst_by_id;
  for (const auto& x : instances) inst_by_id[x.post_id] = &x;

  StageReport report;
  std::vector<InstructionRecord> records;
  AblationContext ctx;
  for (const auto& rat : read_jsonl_as<RationaleRecord>(ws_.rationales_file(), rationale_from_json)) {
    auto x = inst_by_id.find(rat.post_id);
    if (x == inst_by_id.end()) {
      ++report.failed;
      report.failures.push_back(rat.post_id + ": no processed instance");
      continue;
    }
    std::optional<std::string> image;
    if (auto p = post_by_id.find(rat.post_id); p != post_by_id.end() && !p->second->image.is_inline()) {
      image = fs::relative(p->second->image.path, ws_.root).generic_string();
    }
    records.push_back(assemble_record(*x->second, rat, config_.include_image, image));
    ctx.instances[rat.post_id] = x->second;
    ctx.labels[rat.post_id] = rat.terminal_label;
  }
  records = apply_ablation(std::move(records), config_.ablation, ctx);
  std::vector<ojson> lines;
  for (const auto& rec : records) lines.push_back(to_json(rec));
  write_jsonl(ws_.dataset_dir(config_.ablation) / "records.jsonl", lines);
  report.processed = records.size();
  return report;
}

SplitReport Pipeline::split() {
  const auto dir = ws_.dataset_dir(config_.ablation);
  auto records = read_jsonl_as<InstructionRecord>(dir / "records.jsonl", instruction_from_json);
  SplitResult result;
  if (!config_.split_file.empty()) {
    result = apply_split_assignment(std::move(records), parse_split_assignment(read_text_file(config_.split_file)));
  } else {
    const auto golds = gold_labels(load_posts());
    std::vector<StandardLabel> labels;
    for (const auto& rec : records) {
      auto it = golds.find(rec.post_id);
      if (it == golds.end()) throw Error(ErrorCode::MissingInput, "no post for record '" + rec.post_id + "'");
      labels.push_back(it->second);
    }
    result = split_dataset(std::move(records), labels, config_.test_fraction, config_.seed);
  }
  auto write = [](const fs::path& path, const std::vector<InstructionRecord>& recs) {
    std::vector<ojson> lines;
    for (const auto& rec : recs) lines.push_back(to_json(rec));
    write_jsonl(path, lines);
  };
  write(dir / "train.jsonl", result.train);
  write(dir / "test.jsonl", result.test);
  return {result.train.size(), result.test.size()};
}

DatasetStats Pipeline::stats() {
  const auto golds = gold_labels(load_posts());
  const auto dir = ws_.dataset_dir(config_.ablation);
  std::vector<LabeledRecord> labeled;
  for (const char* name : {"train.jsonl", "test.jsonl"}) {
    for (const auto& rec : read_jsonl_as<InstructionRecord>(dir / name, instruction_from_json)) {
      auto it = golds.find(rec.post_id);
      if (it == golds.end()) throw Error(ErrorCode::MissingInput, "no post for record '" + rec.post_id + "'");
      labeled.push_back({rec.split, it->second});
    }
  }
  auto s = dataset_stats(labeled);
  write_text_file(ws_.results_dir() / "stats.tsv", render_stats_tsv(s));
  write_text_file(ws_.results_dir() / "stats.txt", render_stats_table(s));
  return s;
}

Histogram Pipeline::length_histogram() {
  std::unordered_map<std::string, std::string> outputs;
  if (fs::exists(ws_.rationales_file())) {
    for (const auto& r : read_jsonl_as<RationaleRecord>(ws_.rationales_file(), rationale_from_json)) {
      outputs[r.post_id] = r.output_text;
    }
  }
  const auto& r = config_.retrieval;
  std::vector<LengthEntry> entries;
  for (const auto& x : load_instances()) {
    const auto out = outputs.count(x.post_id) ? outputs.at(x.post_id) : std::string();
    for (std::size_t m = 0; m <= r.max_textual; ++m) {
      for (std::size_t n = 0; n <= r.max_visual; ++n) {
        auto capped = with_selected_evidence(x, m, n, r.max_item_chars);
        if (capped.textual_evidence.size() != m || capped.visual_evidence.size() != n) continue;
        entries.push_back({m, n, render_inference_prompt(capped).text + "\n" + out});
      }
    }
  }
  auto h = evidistill::length_histogram(entries, config_.length_unit, config_.bucket_width);
  write_text_file(ws_.results_dir() / "length_histogram.tsv", render_histogram_tsv(h));
  return h;
}

std::vector<InstructionRecord> Pipeline::load_eval_records() const {
  const auto dir = ws_.dataset_dir(config_.ablation);
  if (fs::exists(dir / "test.jsonl")) return read_jsonl_as<InstructionRecord>(dir / "test.jsonl", instruction_from_json);
  log::info("no test split found; evaluating on every assembled record");
  return read_jsonl_as<InstructionRecord>(dir / "records.jsonl", instruction_from_json);
}

std::vector<EvalItem> Pipeline::eval_items() const {
  const auto golds = gold_labels(load_posts());
  std::unordered_map<std::string, ProcessedInstance> by_id;
  for (auto& x : load_instances()) by_id.emplace(x.post_id, std::move(x));
  std::vector<EvalItem> items;
  for (const auto& rec : load_eval_records()) {
    auto x = by_id.find(rec.post_id);
    auto g = golds.find(rec.post_id);
    if (x == by_id.end() || g == golds.end()) {
      throw Error(ErrorCode::MissingInput, "record '" + rec.post_id + "' has no instance or post");
    }
    items.push_back({x->second, g->second, rec.image});
  }
  return items;
}

std::unique_ptr<ModelClient> Pipeline::make_model_client() const {
  const auto& m = config_.model;
  if (m.kind == "echo") return make_echo_client(load_eval_records());
  if (m.kind == "constant") return make_constant_client(m.constant_text);
  if (m.kind == "chat_completion") return make_chat_model_client(m.url, m.model_id, m.api_key_env, m.timeout_seconds);
  return make_student_http_client(m.url, m.timeout_seconds);
}

namespace {

EvalConfig eval_config(const PipelineConfig& c) {
  EvalConfig e;
  e.max_textual = c.retrieval.max_textual;
  e.max_visual = c.retrieval.max_visual;
  e.max_item_chars = c.retrieval.max_item_chars;
  e.ablation = c.ablation;
  e.include_image = c.include_image;
  e.parallelism = c.parallelism;
  e.availability_probe = c.availability_probe;
  return e;
}

}  // namespace

EvalReport Pipeline::eval(bool resume) {
  auto items = eval_items();
  auto client = make_model_client();
  const auto dir = ws_.results_dir() / std::string(to_string(config_.ablation));
  EvalReport report;
  report.log_file = dir / (sanitize_engine_id(client->id()) + ".log.jsonl");
  report.metrics_file = dir / (sanitize_engine_id(client->id()) + ".metrics.tsv");
  report.result = evaluate(*client, items, eval_config(config_), report.log_file, resume);
  write_text_file(report.metrics_file, render_metrics_tsv(report.result.metrics));
  return report;
}

std::vector<SweepPoint> Pipeline::sweep() {
  auto items = eval_items();
  auto client = make_model_client();
  auto points = evidence_count_sweep(*client, items, config_.sweep_textual, config_.sweep_visual, eval_config(config_));
  write_text_file(ws_.results_dir() / "sweep.tsv", render_sweep_tsv(points));
  return points;
}

}  // namespace evidistill

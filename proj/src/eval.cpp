#include "evidistill/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <unordered_set>

#include "json.hpp"
#include "evidistill/error.hpp"
#include "evidistill/hash.hpp"
#include "evidistill/http.hpp"
#include "evidistill/labels.hpp"
#include "evidistill/log.hpp"
#include "evidistill/parallel.hpp"
#include "evidistill/prompt.hpp"
#include "evidistill/retrieval.hpp"
#include "evidistill/serialization.hpp"
#include "evidistill/text.hpp"

namespace evidistill {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics compute_metrics(std::span<const StandardLabel> golds, std::span<const Prediction> preds) {
  if (golds.size() != preds.size()) throw Error(ErrorCode::LengthMismatch, "golds and predictions differ in length");
  if (golds.empty()) throw Error(ErrorCode::EmptyInput, "nothing to score");

  std::array<std::size_t, 3> tp{}, fp{}, fn{}, support{};
  std::size_t correct = 0;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto g = to_code(golds[i]);
    ++support[g];
    if (!preds[i]) {
      ++failures;
      ++fn[g];
      continue;
    }
    const auto p = to_code(*preds[i]);
    if (p == g) {
      ++correct;
      ++tp[g];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }

  Metrics m;
  m.n = golds.size();
  m.accuracy = ratio(correct, m.n);
  m.parse_failure_rate = ratio(failures, m.n);
  std::size_t classes = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    auto& pc = m.per_class[c];
    pc.support = support[c];
    pc.precision = ratio(tp[c], tp[c] + fp[c]);
    pc.recall = ratio(tp[c], tp[c] + fn[c]);
    pc.f1 = ratio(2 * tp[c], 2 * tp[c] + fp[c] + fn[c]);
    if (support[c] == 0) continue;
    ++classes;
    m.precision += pc.precision;
    m.recall += pc.recall;
    m.f1 += pc.f1;
  }
  m.precision /= static_cast<double>(classes);
  m.recall /= static_cast<double>(classes);
  m.f1 /= static_cast<double>(classes);
  return m;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string render_metrics_tsv(const Metrics& m) {
  std::string out = "metric\tvalue\n";
  out += "n\t" + std::to_string(m.n) + "\n";
  out += "accuracy\t" + fmt(m.accuracy) + "\n";
  out += "precision\t" + fmt(m.precision) + "\n";
  out += "recall\t" + fmt(m.recall) + "\n";
  out += "f1\t" + fmt(m.f1) + "\n";
  out += "parse_failure_rate\t" + fmt(m.parse_failure_rate) + "\n";
  for (auto l : kAllLabels) {
    const auto& c = m.of(l);
    const std::string p(surface(l));
    out += p + ".precision\t" + fmt(c.precision) + "\n";
    out += p + ".recall\t" + fmt(c.recall) + "\n";
    out += p + ".f1\t" + fmt(c.f1) + "\n";
    out += p + ".support\t" + std::to_string(c.support) + "\n";
  }
  return out;
}

std::string render_metrics_text(const Metrics& m) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.2f", v * 100.0);
    return std::string(buf);
  };
  std::string out = "n=" + std::to_string(m.n) + "  accuracy " + pct(m.accuracy) + "  precision " +
                    pct(m.precision) + "  recall " + pct(m.recall) + "  f1 " + pct(m.f1) + "  parse failures " +
                    pct(m.parse_failure_rate) + "\n";
  for (auto l : kAllLabels) {
    const auto& c = m.of(l);
    char buf[128];
    std::snprintf(buf, sizeof buf, "  %-10s P %s  R %s  F1 %s  support %zu\n", std::string(surface(l)).c_str(),
                  pct(c.precision).c_str(), pct(c.recall).c_str(), pct(c.f1).c_str(), c.support);
    out += buf;
  }
  return out;
}

namespace {

class EchoClient final : public ModelClient {
 public:
  explicit EchoClient(std::span<const InstructionRecord> records) {
    for (const auto& r : records) {
      by_prompt_.emplace(r.instruction_text, r.target_text);
      by_id_.emplace(r.post_id, r.target_text);
    }
  }
  std::string id() const override { return "echo"; }
  std::string complete(const ModelRequest& req) override {
    if (auto it = by_prompt_.find(req.prompt); it != by_prompt_.end()) return it->second;
    if (auto it = by_id_.find(req.post_id); it != by_id_.end()) return it->second;
    throw Error(ErrorCode::EndpointFailure, "echo client has no record for '" + req.post_id + "'");
  }

 private:
  std::unordered_map<std::string, std::string> by_prompt_;
  std::unordered_map<std::string, std::string> by_id_;
};

class ScriptedClient final : public ModelClient {
 public:
  ScriptedClient(std::string id, std::function<std::string(const ModelRequest&)> script)
      : id_(std::move(id)), script_(std::move(script)) {}
  std::string id() const override { return id_; }
  std::string complete(const ModelRequest& req) override { return script_(req); }

 private:
  std::string id_;
  std::function<std::string(const ModelRequest&)> script_;
};

HttpResponse post_json(const std::string& url, const json& body, double timeout, const std::string& api_key_env) {
  HttpRequest req;
  req.method = "POST";
  req.url = url;
  req.body = body.dump();
  req.content_type = "application/json";
  req.timeout_seconds = timeout;
  if (!api_key_env.empty()) {
    if (const char* key = std::getenv(api_key_env.c_str()); key && *key) {
      req.headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
  }
  auto resp = http_send(req);
  if (!resp.ok()) throw Error(ErrorCode::EndpointFailure, url + " returned HTTP " + std::to_string(resp.status));
  return resp;
}

class ChatModelClient final : public ModelClient {
 public:
  ChatModelClient(std::string url, std::string model, std::string key_env, double timeout)
      : url_(std::move(url)), model_(std::move(model)), key_env_(std::move(key_env)), timeout_(timeout) {}
  std::string id() const override { return "chat:" + model_; }
  std::string complete(const ModelRequest& req) override {
    json body = {{"model", model_},
                 {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
                 {"temperature", 0}};
    auto j = json::parse(post_json(url_, body, timeout_, key_env_).body, nullptr, false);
    try {
      const auto& c = j.at("choices").at(0).at("message").at("content");
      return c.is_null() ? std::string() : c.get<std::string>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::EndpointFailure, "response has no choices[0].message.content");
    }
  }

 private:
  std::string url_, model_, key_env_;
  double timeout_;
};

class StudentHttpClient final : public ModelClient {
 public:
  StudentHttpClient(std::string url, double timeout) : url_(std::move(url)), timeout_(timeout) {}
  std::string id() const override { return "student:" + url_; }
  std::string complete(const ModelRequest& req) override {
    json body = {{"prompt", req.prompt}, {"image", req.image ? json(*req.image) : json(nullptr)}};
    auto j = json::parse(post_json(url_, body, timeout_, {}).body, nullptr, false);
    if (!j.is_object() || !j.contains("completion") || !j["completion"].is_string()) {
      throw Error(ErrorCode::EndpointFailure, "student response has no completion");
    }
    return j["completion"].get<std::string>();
  }

 private:
  std::string url_;
  double timeout_;
};

}  // namespace

std::unique_ptr<ModelClient> make_echo_client(std::span<const InstructionRecord> records) {
  return std::make_unique<EchoClient>(records);
}

std::unique_ptr<ModelClient> make_constant_client(std::string completion) {
  return std::make_unique<ScriptedClient>("constant", [c = std::move(completion)](const ModelRequest&) { return c; });
}

std::unique_ptr<ModelClient> make_scripted_client(std::string id,
                                                  std::function<std::string(const ModelRequest&)> script) {
  return std::make_unique<ScriptedClient>(std::move(id), std::move(script));
}

std::unique_ptr<ModelClient> make_chat_model_client(std::string url, std::string model_id, std::string api_key_env,
                                                    double timeout_seconds) {
  return std::make_unique<ChatModelClient>(std::move(url), std::move(model_id), std::move(api_key_env),
                                           timeout_seconds);
}

std::unique_ptr<ModelClient> make_student_http_client(std::string url, double timeout_seconds) {
  return std::make_unique<StudentHttpClient>(std::move(url), timeout_seconds);
}

std::string eval_prompt(const ProcessedInstance& x, const EvalConfig& config) {
  if (config.ablation == AblationKind::NoEvidenceNoRationale) return render_inference_prompt(strip_evidence(x)).text;
  return render_inference_prompt(with_selected_evidence(x, config.max_textual, config.max_visual,
                                                        config.max_item_chars))
      .text;
}

namespace {

ojson log_to_json(const EvalLogEntry& e) {
  ojson j;
  j["post_id"] = e.post_id;
  j["prompt_fingerprint"] = e.prompt_fingerprint;
  j["raw_output"] = e.raw_output;
  j["extracted_label"] = e.extracted ? ojson(std::string(surface(*e.extracted))) : ojson(nullptr);
  j["gold_label"] = std::string(surface(e.gold));
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

EvalLogEntry log_from_json(const json& j) {
  EvalLogEntry e;
  e.post_id = j.at("post_id").get<std::string>();
  e.prompt_fingerprint = j.value("prompt_fingerprint", "");
  e.raw_output = j.value("raw_output", "");
  if (j.contains("extracted_label") && !j["extracted_label"].is_null()) e.extracted = label_from_json(j["extracted_label"]);
  e.gold = label_from_json(j.at("gold_label"));
  e.error = j.value("error", "");
  return e;
}

}  // namespace

EvalResult evaluate(ModelClient& client, std::span<const EvalItem> items, const EvalConfig& config,
                    const std::optional<fs::path>& log_path, bool resume) {
  if (items.empty()) throw Error(ErrorCode::EmptyInput, "no test records");

  std::unordered_map<std::string, EvalLogEntry> prior;
  if (log_path && resume && fs::exists(*log_path)) {
    for (const auto& j : read_jsonl(*log_path)) {
      auto e = log_from_json(j);
      prior.insert_or_assign(e.post_id, std::move(e));
    }
  }
  std::optional<JsonlWriter> writer;
  if (log_path) writer.emplace(*log_path, resume);

  std::vector<std::optional<EvalLogEntry>> entries(items.size());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (auto it = prior.find(items[i].instance.post_id); it != prior.end()) {
      entries[i] = it->second;
    } else {
      todo.push_back(i);
    }
  }

  const std::size_t probe = std::min(config.availability_probe, todo.size());
  std::size_t committed = 0;
  std::size_t leading_failures = 0;

  auto task = [&](std::size_t k) {
    const auto& item = items[todo[k]];
    EvalLogEntry e;
    e.post_id = item.instance.post_id;
    e.gold = item.gold;
    ModelRequest req{item.instance.post_id, eval_prompt(item.instance, config),
                     config.include_image ? item.image : std::nullopt};
    e.prompt_fingerprint = sha256_hex(req.prompt);
    try {
      e.raw_output = client.complete(req);
      e.extracted = extract_label(e.raw_output);
    } catch (const Error& err) {
      e.error = err.what();
    }
    return e;
  };
  auto commit = [&](std::size_t k, EvalLogEntry& e) {
    if (!e.error.empty()) log::warn("model request failed for " + e.post_id + ": " + e.error);
    if (writer) writer->write(log_to_json(e));
    if (committed < probe && !e.error.empty()) ++leading_failures;
    ++committed;
    if (probe > 0 && committed == probe && leading_failures == probe) {
      throw Error(ErrorCode::ClientUnavailable,
                  "model client " + client.id() + " failed the first " + std::to_string(probe) + " requests");
    }
    entries[todo[k]] = std::move(e);
  };
  ordered_parallel<EvalLogEntry>(todo.size(), config.parallelism, task, commit);

  EvalResult result;
  std::vector<StandardLabel> golds;
  std::vector<Prediction> preds;
  for (auto& e : entries) {
    golds.push_back(e->gold);
    preds.push_back(e->extracted);
    result.log.push_back(std::move(*e));
  }
  result.metrics = compute_metrics(golds, preds);
  return result;
}

Metrics rescore_log(const fs::path& log_path) {
  std::vector<StandardLabel> golds;
  std::vector<Prediction> preds;
  std::unordered_set<std::string> seen;
  for (const auto& j : read_jsonl(log_path)) {
    auto e = log_from_json(j);
    if (!seen.insert(e.post_id).second) continue;
    golds.push_back(e.gold);
    preds.push_back(e.extracted);
  }
  return compute_metrics(golds, preds);
}

std::vector<SweepPoint> evidence_count_sweep(ModelClient& client, std::span<const EvalItem> items,
                                             std::span<const std::size_t> textual_grid,
                                             std::span<const std::size_t> visual_grid, EvalConfig config) {
  if (textual_grid.empty() || visual_grid.empty()) throw Error(ErrorCode::ConfigInvalid, "sweep grid is empty");
  std::vector<SweepPoint> out;
  for (auto m : textual_grid) {
    for (auto n : visual_grid) {
      config.max_textual = m;
      config.max_visual = n;
      out.push_back({m, n, evaluate(client, items, config).metrics});
    }
  }
  return out;
}

std::string render_sweep_tsv(std::span<const SweepPoint> points) {
  std::string out = "m\tn\ttotal\taccuracy\tprecision\trecall\tf1\tparse_failure_rate\n";
  for (const auto& p : points) {
    out += std::to_string(p.m) + "\t" + std::to_string(p.n) + "\t" + std::to_string(p.m + p.n) + "\t" +
           fmt(p.metrics.accuracy) + "\t" + fmt(p.metrics.precision) + "\t" + fmt(p.metrics.recall) + "\t" +
           fmt(p.metrics.f1) + "\t" + fmt(p.metrics.parse_failure_rate) + "\n";
  }
  return out;
}

ResultRow result_row(std::string name, const Metrics& m) {
  return {std::move(name), {m.accuracy, m.precision, m.recall, m.f1}};
}

ComparisonTable::Flag ComparisonTable::flag(std::size_t row, std::size_t column) const {
  if (best[column] == row) return Flag::Best;
  if (second[column] == row) return Flag::Second;
  return Flag::None;
}

ComparisonTable compare_ablations(std::vector<ResultRow> rows) {
  if (rows.size() < 2) throw Error(ErrorCode::EmptyInput, "comparison needs at least two result sets");
  ComparisonTable t;
  t.rows = std::move(rows);
  for (std::size_t c = 0; c < 4; ++c) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < t.rows.size(); ++r) {
      if (t.rows[r].values[c] > t.rows[best].values[c]) best = r;
    }
    std::optional<std::size_t> second;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (r == best) continue;
      if (!second || t.rows[r].values[c] > t.rows[*second].values[c]) second = r;
    }
    t.best[c] = best;
    t.second[c] = second;
  }
  return t;
}

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_comparison(const ComparisonTable& table, double scale) {
  const std::vector<std::string> header = {"Model", "Accuracy", "Precision", "Recall", "F1"};
  std::vector<std::vector<std::string>> cells;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<std::string> row = {table.rows[r].name};
    for (std::size_t c = 0; c < 4; ++c) {
      auto v = fixed2(table.rows[r].values[c] * scale);
      switch (table.flag(r, c)) {
        case ComparisonTable::Flag::Best: v = "**" + v + "**"; break;
        case ComparisonTable::Flag::Second: v = "_" + v + "_"; break;
        case ComparisonTable::Flag::None: break;
      }
      row.push_back(v);
    }
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    width[i] = text::utf8_length(header[i]);
    for (const auto& row : cells) width[i] = std::max(width[i], text::utf8_length(row[i]));
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string out = row[0] + std::string(width[0] - text::utf8_length(row[0]), ' ');
    for (std::size_t i = 1; i < row.size(); ++i) {
      out += "  " + std::string(width[i] - text::utf8_length(row[i]), ' ') + row[i];
    }
    return out + "\n";
  };
  std::string out = line(header);
  for (const auto& row : cells) out += line(row);
  return out;
}

std::string render_comparison_tsv(const ComparisonTable& table) {
  static constexpr const char* kColumns[] = {"accuracy", "precision", "recall", "f1"};
  std::string out = "name";
  for (auto c : kColumns) out += std::string("\t") + c + "\t" + c + "_flag";
  out += "\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out += table.rows[r].name;
    for (std::size_t c = 0; c < 4; ++c) {
      const auto f = table.flag(r, c);
      out += "\t" + fmt(table.rows[r].values[c]) + "\t" +
             (f == ComparisonTable::Flag::Best ? "best" : f == ComparisonTable::Flag::Second ? "second" : "");
    }
    out += "\n";
  }
  return out;
}

std::vector<ResultRow> parse_result_rows(std::string_view tsv) {
  std::vector<ResultRow> rows;
  for (const auto& raw : text::split(tsv, '\n')) {
    auto line = text::rtrim(raw);
    if (text::trim(line).empty() || line.front() == '#') continue;
    auto cols = text::split(line, '\t');
    if (cols.size() != 5) throw Error(ErrorCode::SchemaViolation, "result row needs 5 columns: " + line);
    if (text::ascii_lower(cols[0]) == "name" || text::ascii_lower(cols[0]) == "model") continue;
    ResultRow row{cols[0], {}};
    for (std::size_t c = 0; c < 4; ++c) {
      try {
        const auto cell = text::trim(cols[c + 1]);
        std::size_t used = 0;
        row.values[c] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::SchemaViolation, "result row '" + cols[0] + "' has a non-numeric value");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace evidistill

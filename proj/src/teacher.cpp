#include "evidistill/teacher.hpp"

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
#include "evidistill/serialization.hpp"
#include "evidistill/text.hpp"

namespace evidistill {
namespace fs = std::filesystem;
using nlohmann::json;

void TeacherConfig::validate() const {
  if (model_id.empty()) throw Error(ErrorCode::ConfigInvalid, "teacher model_id is empty");
  if (!(temperature >= 0)) throw Error(ErrorCode::ConfigInvalid, "teacher temperature must be >= 0");
  if (max_output_tokens < 64) throw Error(ErrorCode::ConfigInvalid, "teacher max_output_tokens must be >= 64");
  if (parallelism == 0) throw Error(ErrorCode::ConfigInvalid, "teacher parallelism must be >= 1");
  if (endpoint.kind != "mock" && endpoint.kind != "chat_completion") {
    throw Error(ErrorCode::ConfigInvalid, "unknown teacher endpoint kind '" + endpoint.kind + "'");
  }
  if (endpoint.kind == "chat_completion" && endpoint.url.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "teacher endpoint url is empty");
  }
  retry.validate();
}

namespace {

class ChatCompletionClient final : public TeacherClient {
 public:
  explicit ChatCompletionClient(TeacherEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  std::string id() const override { return "chat_completion"; }

  std::string complete(const std::string& prompt, const TeacherConfig& config) override {
    json body = {{"model", config.model_id},
                 {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                 {"temperature", config.temperature},
                 {"max_tokens", config.max_output_tokens}};
    HttpRequest req;
    req.method = "POST";
    req.url = endpoint_.url;
    req.body = body.dump();
    req.content_type = "application/json";
    req.timeout_seconds = endpoint_.timeout_seconds;
    if (!endpoint_.api_key_env.empty()) {
      if (const char* key = std::getenv(endpoint_.api_key_env.c_str()); key && *key) {
        req.headers.emplace_back("Authorization", std::string("Bearer ") + key);
      }
    }
    HttpResponse resp;
    try {
      resp = http_send(req);
    } catch (const Error& e) {
      throw Error(ErrorCode::EndpointFailure, e.what());
    }
    if (!resp.ok()) {
      throw Error(ErrorCode::EndpointFailure, endpoint_.url + " returned HTTP " + std::to_string(resp.status));
    }
    auto j = json::parse(resp.body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::EndpointFailure, "teacher response is not JSON");
    try {
      const auto& content = j.at("choices").at(0).at("message").at("content");
      return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::EndpointFailure, "teacher response has no choices[0].message.content");
    }
  }

 private:
  TeacherEndpoint endpoint_;
};

class MockTeacher final : public TeacherClient {
 public:
  std::string id() const override { return "mock"; }

  std::string complete(const std::string& prompt, const TeacherConfig&) override {
    std::optional<StandardLabel> gold;
    for (const auto& line : text::split(prompt, '\n')) {
      if (line.rfind("label: ", 0) == 0) gold = label_from_surface(line.substr(7));
    }
    if (!gold) throw Error(ErrorCode::EndpointFailure, "mock teacher: prompt carries no label line");
    const auto options = LabelTable::builtin().entries_for(*gold);
    const auto digest = sha256_hex(prompt);
    const auto pick = std::stoul(digest.substr(0, 8), nullptr, 16) % options.size();
    return "The post is labeled as " + std::string(surface(*gold)) +
           " because the textual evidences and the image evidences are consistent with this verdict. "
           "A suitable fine-grained label for the post is \"" +
           options[pick].canonical_text + "\".";
  }
};

class FunctionTeacher final : public TeacherClient {
 public:
  FunctionTeacher(std::string id, std::function<std::string(const std::string&)> fn)
      : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  std::string complete(const std::string& prompt, const TeacherConfig&) override { return fn_(prompt); }

 private:
  std::string id_;
  std::function<std::string(const std::string&)> fn_;
};

}  // namespace

std::unique_ptr<TeacherClient> make_chat_completion_client(const TeacherEndpoint& endpoint) {
  return std::make_unique<ChatCompletionClient>(endpoint);
}

std::unique_ptr<TeacherClient> make_mock_teacher() { return std::make_unique<MockTeacher>(); }

std::unique_ptr<TeacherClient> make_function_teacher(std::string id,
                                                     std::function<std::string(const std::string&)> fn) {
  return std::make_unique<FunctionTeacher>(std::move(id), std::move(fn));
}

std::unique_ptr<TeacherClient> make_teacher_client(const TeacherConfig& config) {
  config.validate();
  if (config.endpoint.kind == "mock") return make_mock_teacher();
  return make_chat_completion_client(config.endpoint);
}

std::string append_label_suffix(std::string_view raw_output, StandardLabel gold) {
  if (auto existing = trailing_terminal_label(raw_output)) {
    if (*existing == gold) return std::string(raw_output);
    throw Error(ErrorCode::LabelConflict, "output closes with label '" + std::string(surface(*existing)) +
                                              "' but the gold label is '" + std::string(surface(gold)) + "'");
  }
  auto body = text::rtrim(raw_output);
  if (body.empty()) return terminal_sentence(gold);
  return body + " " + terminal_sentence(gold);
}

RationaleElicitor::RationaleElicitor(TeacherConfig config, std::shared_ptr<TeacherClient> client,
                                     std::shared_ptr<RequestGate> gate, std::shared_ptr<ResponseCache> cache,
                                     Sleeper sleeper)
    : config_(std::move(config)),
      client_(std::move(client)),
      gate_(std::move(gate)),
      cache_(std::move(cache)),
      sleeper_(std::move(sleeper)) {
  config_.validate();
  if (!client_) throw Error(ErrorCode::ConfigInvalid, "no teacher client");
}

void RationaleElicitor::spend() {
  {
    std::lock_guard lock(mutex_);
    if (config_.cost_budget && spent_ >= *config_.cost_budget) {
      throw Error(ErrorCode::BudgetExhausted,
                  "teacher budget of " + std::to_string(*config_.cost_budget) + " requests exhausted");
    }
    ++spent_;
  }
  if (gate_) gate_->acquire();
}

std::size_t RationaleElicitor::requests_spent() const {
  std::lock_guard lock(mutex_);
  return spent_;
}

std::string RationaleElicitor::complete(const std::string& prompt, const std::string& fingerprint) {
  const std::string engine = "teacher-" + client_->id();
  const std::string key = sha256_hex(fingerprint + "\n" + config_.model_id);
  if (cache_) {
    if (auto hit = cache_->get(engine, key)) return *hit;
  }
  auto completion = with_retries(config_.retry, sleeper_, {ErrorCode::EndpointFailure}, [&] {
    spend();
    return client_->complete(prompt, config_);
  });
  if (text::trim(completion).empty()) throw Error(ErrorCode::EmptyCompletion, "teacher returned an empty completion");
  if (cache_) cache_->put(engine, key, completion, fingerprint);
  return completion;
}

RationaleRecord RationaleElicitor::make_record(const ProcessedInstance& x, StandardLabel gold,
                                               const RenderedPrompt& prompt, std::string_view raw) const {
  RationaleRecord r;
  r.post_id = x.post_id;
  r.output_text = append_label_suffix(raw, gold);
  r.fine_grained = extract_fine_grained(r.output_text, LabelTable::builtin());
  r.terminal_label = gold;
  r.prompt_fingerprint = prompt.fingerprint;
  r.teacher_id = client_->id() + ":" + config_.model_id;
  return r;
}

RationaleRecord RationaleElicitor::elicit_rationale(const ProcessedInstance& x, StandardLabel gold) {
  const auto prompt = render_labeling_prompt(x, gold);
  return make_record(x, gold, prompt, complete(prompt.text, prompt.fingerprint));
}

namespace {

enum class Outcome { Ok, Quarantined, Failed, OverBudget };

struct ItemResult {
  Outcome outcome = Outcome::Failed;
  ojson line;
  std::string error;
};

std::unordered_set<std::string> persisted_ids(const fs::path& path) {
  std::unordered_set<std::string> ids;
  if (!fs::exists(path)) return ids;
  for (const auto& j : read_jsonl(path)) {
    if (j.contains("post_id") && j["post_id"].is_string()) ids.insert(j["post_id"].get<std::string>());
  }
  return ids;
}

}  // namespace

BatchReport run_elicitation_batch(std::span<const ElicitationItem> items, RationaleElicitor& elicitor,
                                  const BatchPaths& paths, bool resume) {
  std::unordered_set<std::string> done;
  if (resume) {
    done = persisted_ids(paths.rationales);
    done.merge(persisted_ids(paths.quarantine));
  }
  JsonlWriter rationales(paths.rationales, resume);
  JsonlWriter quarantine(paths.quarantine, resume);

  BatchReport report;
  std::vector<const ElicitationItem*> todo;
  for (const auto& item : items) {
    if (done.count(item.instance.post_id)) {
      ++report.skipped;
    } else {
      todo.push_back(&item);
    }
  }

  const auto spent_before = elicitor.requests_spent();
  std::atomic<bool> over_budget{false};

  auto task = [&](std::size_t i) {
    const auto& item = *todo[i];
    ItemResult result;
    std::string raw;
    const auto prompt = render_labeling_prompt(item.instance, item.gold);
    try {
      raw = elicitor.complete(prompt.text, prompt.fingerprint);
      result.line = to_json(elicitor.make_record(item.instance, item.gold, prompt, raw));
      result.outcome = Outcome::Ok;
    } catch (const Error& e) {
      result.error = item.instance.post_id + ": " + e.what();
      if (e.code() == ErrorCode::BudgetExhausted) {
        result.outcome = Outcome::OverBudget;
        over_budget = true;
      } else if (e.code() == ErrorCode::LabelConflict) {
        const auto conflicting = trailing_terminal_label(raw);
        result.outcome = Outcome::Quarantined;
        result.line = ojson{{"post_id", item.instance.post_id},
                            {"output_text", raw},
                            {"gold_label", std::string(surface(item.gold))},
                            {"conflicting_label", conflicting ? std::string(surface(*conflicting)) : ""},
                            {"prompt_fingerprint", prompt.fingerprint}};
      } else {
        result.outcome = Outcome::Failed;
      }
    }
    return result;
  };

  auto commit = [&](std::size_t, ItemResult& r) {
    switch (r.outcome) {
      case Outcome::Ok:
        rationales.write(r.line);
        ++report.succeeded;
        break;
      case Outcome::Quarantined:
        quarantine.write(r.line);
        ++report.quarantined;
        break;
      case Outcome::Failed:
        log::warn("elicitation failed for " + r.error);
        report.failures.push_back(r.error);
        ++report.failed;
        break;
      case Outcome::OverBudget:
        report.budget_exhausted = true;
        break;
    }
  };

  ordered_parallel<ItemResult>(todo.size(), elicitor.config().parallelism, task, commit,
                               [&] { return over_budget.load(); });
  report.requests_spent = elicitor.requests_spent() - spent_before;
  return report;
}

}  // namespace evidistill

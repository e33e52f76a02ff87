#include "evidistill/serialization.hpp"

#include <sstream>

#include "evidistill/error.hpp"
#include "evidistill/labels.hpp"

namespace evidistill {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorCode::SchemaViolation, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

std::string optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw Error(ErrorCode::SchemaViolation, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

ojson opt_to_json(const std::optional<std::string>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<std::string> opt_from_json(const json& j, const char* key) {
  auto s = optional_string(j, key);
  if (s.empty()) return std::nullopt;
  return s;
}

}  // namespace

StandardLabel label_from_json(const json& j) {
  if (j.is_number_integer()) {
    if (auto l = label_from_code(j.get<int>())) return *l;
  } else if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (auto l = label_from_surface(s)) return *l;
    for (auto l : kAllLabels) {
      if (s == enum_name(l)) return l;
    }
  }
  throw Error(ErrorCode::SchemaViolation, "invalid label " + j.dump());
}

ojson to_json(const Post& post) {
  ojson j;
  j["id"] = post.id;
  j["text"] = post.text;
  j["image"] = post.image.path.generic_string();
  j["label"] = std::string(surface(post.gold_label));
  j["language_hint"] = std::string(to_string(post.language_hint));
  return j;
}

Post post_from_json(const json& j, const fs::path& base_dir) {
  Post post;
  post.id = required_string(j, "id");
  post.text = optional_string(j, "text");
  fs::path image = required_string(j, "image");
  if (image.is_relative() && !base_dir.empty()) image = base_dir / image;
  post.image = ImageRef::from_path(image);
  if (!j.contains("label")) throw Error(ErrorCode::SchemaViolation, "post '" + post.id + "' has no label");
  post.gold_label = label_from_json(j["label"]);
  post.language_hint = language_from_string(optional_string(j, "language_hint"));
  return post;
}

ojson to_json(const ProcessedInstance& x) {
  ojson j;
  j["post_id"] = x.post_id;
  j["text"] = x.text;
  j["ocr_text"] = x.digest.ocr_text;
  j["caption_text"] = x.digest.caption_text;
  j["textual_evidence"] = ojson::array();
  for (const auto& ev : x.textual_evidence) {
    j["textual_evidence"].push_back(ojson{{"title", ev.title},
                                          {"description", ev.description},
                                          {"source_url", opt_to_json(ev.source_url)},
                                          {"rank", ev.rank}});
  }
  j["visual_evidence"] = ojson::array();
  for (const auto& ev : x.visual_evidence) {
    j["visual_evidence"].push_back(ojson{{"image_title", ev.image_title},
                                         {"image_ocr", ev.image_ocr},
                                         {"image_caption", ev.image_caption},
                                         {"source_url", opt_to_json(ev.source_url)},
                                         {"rank", ev.rank}});
  }
  return j;
}

ProcessedInstance instance_from_json(const json& j) {
  ProcessedInstance x;
  x.post_id = required_string(j, "post_id");
  x.text = optional_string(j, "text");
  x.digest.ocr_text = optional_string(j, "ocr_text");
  x.digest.caption_text = optional_string(j, "caption_text");
  if (j.contains("textual_evidence")) {
    for (const auto& e : j["textual_evidence"]) {
      x.textual_evidence.push_back({optional_string(e, "title"), optional_string(e, "description"),
                                    opt_from_json(e, "source_url"), e.value("rank", std::size_t{0})});
    }
  }
  if (j.contains("visual_evidence")) {
    for (const auto& e : j["visual_evidence"]) {
      x.visual_evidence.push_back({optional_string(e, "image_title"), optional_string(e, "image_ocr"),
                                   optional_string(e, "image_caption"), opt_from_json(e, "source_url"),
                                   e.value("rank", std::size_t{0})});
    }
  }
  return x;
}

ojson to_json(const RationaleRecord& r) {
  ojson j;
  j["post_id"] = r.post_id;
  j["output_text"] = r.output_text;
  j["fine_grained"] = ojson::array();
  for (const auto& f : r.fine_grained) j["fine_grained"].push_back(f.canonical_text);
  j["terminal_label"] = std::string(surface(r.terminal_label));
  j["prompt_fingerprint"] = r.prompt_fingerprint;
  j["teacher_id"] = r.teacher_id;
  return j;
}

RationaleRecord rationale_from_json(const json& j) {
  RationaleRecord r;
  r.post_id = required_string(j, "post_id");
  r.output_text = required_string(j, "output_text");
  if (j.contains("fine_grained")) {
    for (const auto& f : j["fine_grained"]) {
      const auto name = f.get<std::string>();
      const auto* entry = LabelTable::builtin().find(name);
      if (!entry) throw Error(ErrorCode::SchemaViolation, "unknown fine-grained label '" + name + "'");
      r.fine_grained.push_back(*entry);
    }
  }
  if (!j.contains("terminal_label")) throw Error(ErrorCode::SchemaViolation, "rationale without terminal_label");
  r.terminal_label = label_from_json(j["terminal_label"]);
  r.prompt_fingerprint = optional_string(j, "prompt_fingerprint");
  r.teacher_id = optional_string(j, "teacher_id");
  return r;
}

ojson to_json(const InstructionRecord& r) {
  ojson j;
  j["post_id"] = r.post_id;
  j["instruction_text"] = r.instruction_text;
  j["image"] = opt_to_json(r.image);
  j["target_text"] = r.target_text;
  j["split"] = std::string(to_string(r.split));
  return j;
}

InstructionRecord instruction_from_json(const json& j) {
  InstructionRecord r;
  r.post_id = required_string(j, "post_id");
  r.instruction_text = required_string(j, "instruction_text");
  r.image = opt_from_json(j, "image");
  r.target_text = required_string(j, "target_text");
  auto split = split_from_string(optional_string(j, "split"));
  if (!split) throw Error(ErrorCode::SchemaViolation, "record '" + r.post_id + "' has an invalid split");
  r.split = *split;
  return r;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::SchemaViolation, path.string() + ":" + std::to_string(line_no) + ": malformed JSON");
    }
    out.push_back(std::move(j));
  }
  return out;
}

JsonlWriter::JsonlWriter(const fs::path& path, bool append) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out_) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
}

void JsonlWriter::write(const ojson& value) {
  auto line = value.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::IoError, "write failed");
}

void write_jsonl(const fs::path& path, const std::vector<ojson>& rows) {
  std::string content;
  for (const auto& r : rows) content += r.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  write_text_file(path, content);
}

void write_text_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace evidistill

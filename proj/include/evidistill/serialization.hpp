#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "evidistill/types.hpp"

namespace evidistill {

using ojson = nlohmann::ordered_json;

// Field names and order are part of the on-disk contract.
ojson to_json(const Post& post);
ojson to_json(const ProcessedInstance& x);
ojson to_json(const RationaleRecord& r);
ojson to_json(const InstructionRecord& r);

// `base_dir` resolves relative image paths.
Post post_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ProcessedInstance instance_from_json(const nlohmann::json& j);
RationaleRecord rationale_from_json(const nlohmann::json& j);
InstructionRecord instruction_from_json(const nlohmann::json& j);

// Label given as surface form ("non-rumor"), enum name or integer code.
StandardLabel label_from_json(const nlohmann::json& j);

// Reads every nonempty line. Throws MissingInput when the file is absent and
// SchemaViolation (with the line number) on malformed JSON.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

template <class T>
std::vector<T> read_jsonl_as(const std::filesystem::path& path, const std::function<T(const nlohmann::json&)>& parse) {
  std::vector<T> out;
  for (const auto& j : read_jsonl(path)) out.push_back(parse(j));
  return out;
}

// Line-oriented writer; each write() is one flushed line. Thread safe.
class JsonlWriter {
 public:
  JsonlWriter(const std::filesystem::path& path, bool append);

  void write(const ojson& value);

 private:
  std::ofstream out_;
  std::mutex mutex_;
};

void write_jsonl(const std::filesystem::path& path, const std::vector<ojson>& rows);

// Writes via a temp file and rename.
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace evidistill

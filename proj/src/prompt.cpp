#include "evidistill/prompt.hpp"

#include <map>
#include <vector>

#include "evidistill/hash.hpp"
#include "evidistill/resources.hpp"
#include "evidistill/text.hpp"

namespace evidistill {
namespace {

// Single pass over the skeleton: substituted values are never rescanned, so
// post text containing "{label}" stays literal.
std::string fill(std::string_view skeleton, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(skeleton.size() + 256);
  std::size_t i = 0;
  while (i < skeleton.size()) {
    if (skeleton[i] == '{') {
      auto close = skeleton.find('}', i);
      if (close != std::string_view::npos) {
        auto it = values.find(skeleton.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(skeleton[i++]);
  }
  return out;
}

std::string join_evidence(const std::vector<std::string>& items) {
  return text::join(items, kEvidenceSeparator);
}

std::map<std::string, std::string, std::less<>> instance_values(const ProcessedInstance& x) {
  std::vector<std::string> textual;
  for (const auto& ev : x.textual_evidence) textual.push_back(render_textual_evidence(ev));
  std::vector<std::string> visual;
  for (const auto& ev : x.visual_evidence) visual.push_back(render_visual_evidence(ev));
  return {
      {"post_text", text::normalize_whitespace(x.text)},
      {"image_ocr", text::normalize_whitespace(x.digest.ocr_text)},
      {"image_caption", text::normalize_whitespace(x.digest.caption_text)},
      {"textual_evidence", join_evidence(textual)},
      {"visual_evidence", join_evidence(visual)},
  };
}

RenderedPrompt finish(std::string text, PromptKind kind) {
  auto fp = sha256_hex(text);
  return {std::move(text), kind, std::move(fp)};
}

}  // namespace

std::string fine_grained_block(StandardLabel label, const LabelTable& table) {
  std::vector<std::string> names;
  for (const auto& e : table.entries_for(label)) names.push_back(e.canonical_text);
  return text::join(names, ", ");
}

std::string render_textual_evidence(const TextualEvidence& ev) {
  auto title = text::normalize_whitespace(ev.title);
  auto description = text::normalize_whitespace(ev.description);
  if (title.empty()) return description;
  if (description.empty()) return title;
  return title + ": " + description;
}

std::string render_visual_evidence(const VisualEvidence& ev) {
  return "image_title: " + text::normalize_whitespace(ev.image_title) +
         ", image_ocr: " + text::normalize_whitespace(ev.image_ocr) +
         ", image_caption: " + text::normalize_whitespace(ev.image_caption);
}

RenderedPrompt render_labeling_prompt(const ProcessedInstance& x, StandardLabel gold, const LabelTable& table) {
  auto values = instance_values(x);
  values.emplace("fine_grained_labels", fine_grained_block(gold, table));
  values.emplace("label", std::string(surface(gold)));
  return finish(fill(resources::labeling_template(), values), PromptKind::Labeling);
}

RenderedPrompt render_inference_prompt(const ProcessedInstance& x) {
  return finish(fill(resources::inference_template(), instance_values(x)), PromptKind::Inference);
}

std::string prompt_section(std::string_view prompt, std::string_view heading) {
  const std::string marker = "## " + std::string(heading) + "\n";
  std::size_t start = std::string_view::npos;
  if (prompt.starts_with(marker)) {
    start = 0;
  } else if (auto pos = prompt.find("\n" + marker); pos != std::string_view::npos) {
    start = pos + 1;
  }
  if (start == std::string_view::npos) return {};
  auto end = prompt.find("\n\n## ", start);
  return std::string(prompt.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

}  // namespace evidistill

#pragma once

#include <string>
#include <string_view>

#include "evidistill/labels.hpp"
#include "evidistill/types.hpp"

namespace evidistill {

enum class PromptKind { Labeling, Inference };

struct RenderedPrompt {
  std::string text;
  PromptKind kind = PromptKind::Labeling;
  std::string fingerprint;  // sha256 of text
};

// Separator between evidence items inside one evidence field.
inline constexpr std::string_view kEvidenceSeparator = " <and> ";

// Comma-separated spellings of every fine-grained label of `label`, in table
// order.
std::string fine_grained_block(StandardLabel label, const LabelTable& table = LabelTable::builtin());

// "title: description" (either part alone when the other is empty).
std::string render_textual_evidence(const TextualEvidence& ev);
// "image_title: <t>, image_ocr: <o>, image_caption: <c>"
std::string render_visual_evidence(const VisualEvidence& ev);

// Labeling template instantiated with the instance and its gold label. The
// instance is rendered as given; capping evidence is the caller's job.
RenderedPrompt render_labeling_prompt(const ProcessedInstance& x, StandardLabel gold,
                                      const LabelTable& table = LabelTable::builtin());

// Same template with every label-dependent part removed; needs only x.
RenderedPrompt render_inference_prompt(const ProcessedInstance& x);

// Text from the "## <heading>" line up to (not including) the blank line
// that precedes the next heading. Empty when the heading is absent.
std::string prompt_section(std::string_view prompt, std::string_view heading);

}  // namespace evidistill

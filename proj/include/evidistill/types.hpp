#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evidistill {

// Three-way veracity scheme. Integer codes are part of the data format.
enum class StandardLabel : int { NonRumor = 0, Rumor = 1, Unverified = 2 };

inline constexpr std::array<StandardLabel, 3> kAllLabels = {
    StandardLabel::NonRumor, StandardLabel::Rumor, StandardLabel::Unverified};

constexpr int to_code(StandardLabel label) { return static_cast<int>(label); }
std::optional<StandardLabel> label_from_code(int code);

// Lowercase hyphenated form used inside prompts and outputs: "non-rumor".
std::string_view surface(StandardLabel label);
// Case-insensitive inverse of surface(); surrounding whitespace ignored.
std::optional<StandardLabel> label_from_surface(std::string_view s);
// Enum spelling, "NonRumor".
std::string_view enum_name(StandardLabel label);

enum class LanguageHint { En, Zh, Unknown };

std::string_view to_string(LanguageHint hint);
LanguageHint language_from_string(std::string_view s);

// Image either on disk or in memory.
struct ImageRef {
  std::filesystem::path path;
  std::string bytes;

  static ImageRef from_path(std::filesystem::path p) { return {std::move(p), {}}; }
  static ImageRef from_bytes(std::string b) { return {{}, std::move(b)}; }

  bool is_inline() const { return path.empty(); }
};

struct Post {
  std::string id;
  std::string text;
  ImageRef image;
  StandardLabel gold_label = StandardLabel::Unverified;
  LanguageHint language_hint = LanguageHint::Unknown;
};

struct FineGrainedLabel {
  std::string canonical_text;
  StandardLabel standard = StandardLabel::Unverified;

  friend bool operator==(const FineGrainedLabel&, const FineGrainedLabel&) = default;
};

struct VisualDigest {
  std::string ocr_text;
  std::string caption_text;

  friend bool operator==(const VisualDigest&, const VisualDigest&) = default;
};

struct TextualEvidence {
  std::string title;
  std::string description;
  std::optional<std::string> source_url;
  std::size_t rank = 0;

  friend bool operator==(const TextualEvidence&, const TextualEvidence&) = default;
};

struct VisualEvidence {
  std::string image_title;
  std::string image_ocr;
  std::string image_caption;
  std::optional<std::string> source_url;
  std::size_t rank = 0;

  friend bool operator==(const VisualEvidence&, const VisualEvidence&) = default;
};

struct ProcessedInstance {
  std::string post_id;
  std::string text;
  VisualDigest digest;
  std::vector<TextualEvidence> textual_evidence;
  std::vector<VisualEvidence> visual_evidence;

  friend bool operator==(const ProcessedInstance&, const ProcessedInstance&) = default;
};

struct RationaleRecord {
  std::string post_id;
  std::string output_text;
  std::vector<FineGrainedLabel> fine_grained;
  StandardLabel terminal_label = StandardLabel::Unverified;
  std::string prompt_fingerprint;
  std::string teacher_id;

  friend bool operator==(const RationaleRecord&, const RationaleRecord&) = default;
};

enum class Split { Train, Test };

std::string_view to_string(Split split);
std::optional<Split> split_from_string(std::string_view s);

struct InstructionRecord {
  std::string post_id;
  std::string instruction_text;
  std::optional<std::string> image;
  std::string target_text;
  Split split = Split::Train;

  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

// Empty when the post satisfies every invariant checkable in isolation.
// Dataset-level uniqueness of ids is checked by validate_posts.
struct ValidationReport {
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
  bool mentions(std::string_view needle) const;
};

ValidationReport validate_post(const Post& post);
ValidationReport validate_posts(const std::vector<Post>& posts);

}  // namespace evidistill

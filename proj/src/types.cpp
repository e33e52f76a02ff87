#include "evidistill/types.hpp"

#include <set>
#include <system_error>

#include "evidistill/text.hpp"

namespace evidistill {

std::optional<StandardLabel> label_from_code(int code) {
  if (code < 0 || code > 2) return std::nullopt;
  return static_cast<StandardLabel>(code);
}

std::string_view surface(StandardLabel label) {
  switch (label) {
    case StandardLabel::NonRumor: return "non-rumor";
    case StandardLabel::Rumor: return "rumor";
    case StandardLabel::Unverified: return "unverified";
  }
  return "unverified";
}

std::optional<StandardLabel> label_from_surface(std::string_view s) {
  const std::string key = text::ascii_lower(text::trim(s));
  for (auto label : kAllLabels) {
    if (key == surface(label)) return label;
  }
  return std::nullopt;
}

std::string_view enum_name(StandardLabel label) {
  switch (label) {
    case StandardLabel::NonRumor: return "NonRumor";
    case StandardLabel::Rumor: return "Rumor";
    case StandardLabel::Unverified: return "Unverified";
  }
  return "Unverified";
}

std::string_view to_string(LanguageHint hint) {
  switch (hint) {
    case LanguageHint::En: return "en";
    case LanguageHint::Zh: return "zh";
    case LanguageHint::Unknown: return "unknown";
  }
  return "unknown";
}

LanguageHint language_from_string(std::string_view s) {
  const auto key = text::ascii_lower(s);
  if (key == "en") return LanguageHint::En;
  if (key == "zh") return LanguageHint::Zh;
  return LanguageHint::Unknown;
}

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

std::optional<Split> split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

bool ValidationReport::mentions(std::string_view needle) const {
  for (const auto& p : problems) {
    if (p.find(needle) != std::string::npos) return true;
  }
  return false;
}

ValidationReport validate_post(const Post& post) {
  ValidationReport report;
  if (post.id.empty()) report.problems.emplace_back("empty id");
  if (!text::is_valid_utf8(post.text)) report.problems.emplace_back("text is not valid UTF-8");
  if (post.image.is_inline()) {
    if (post.image.bytes.empty()) report.problems.emplace_back("image unresolvable: no path or bytes");
  } else {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(post.image.path, ec)) {
      report.problems.emplace_back("image unresolvable: " + post.image.path.string());
    }
  }
  return report;
}

ValidationReport validate_posts(const std::vector<Post>& posts) {
  ValidationReport report;
  std::set<std::string> seen;
  for (const auto& post : posts) {
    for (auto& problem : validate_post(post).problems) {
      report.problems.push_back("post '" + post.id + "': " + problem);
    }
    if (!post.id.empty() && !seen.insert(post.id).second) {
      report.problems.push_back("duplicate id '" + post.id + "'");
    }
  }
  return report;
}

}  // namespace evidistill

#include "evidistill/labels.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include "evidistill/error.hpp"
#include "evidistill/resources.hpp"
#include "evidistill/text.hpp"

namespace evidistill {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
}

std::size_t skip_space(std::string_view s, std::size_t i) {
  while (i < s.size() && is_space(s[i])) ++i;
  return i;
}

// Parses "<label>" (or "</label>" when closing) starting at s[i] == '<' in a
// lowercased string. Returns one past '>' or npos.
std::size_t match_tag(std::string_view s, std::size_t i, bool closing) {
  if (i >= s.size() || s[i] != '<') return std::string_view::npos;
  i = skip_space(s, i + 1);
  if (closing) {
    if (i >= s.size() || s[i] != '/') return std::string_view::npos;
    i = skip_space(s, i + 1);
  }
  if (s.substr(i, 5) != "label") return std::string_view::npos;
  i = skip_space(s, i + 5);
  if (i >= s.size() || s[i] != '>') return std::string_view::npos;
  return i + 1;
}

struct TaggedMention {
  std::string content;
  std::size_t end = 0;  // one past the closing tag
};

std::vector<TaggedMention> tagged_mentions(std::string_view lower) {
  std::vector<TaggedMention> found;
  std::size_t i = 0;
  while ((i = lower.find('<', i)) != std::string_view::npos) {
    auto open_end = match_tag(lower, i, false);
    if (open_end == std::string_view::npos) {
      ++i;
      continue;
    }
    auto close = lower.find('<', open_end);
    if (close == std::string_view::npos) break;
    auto close_end = match_tag(lower, close, true);
    if (close_end == std::string_view::npos) {
      i = close;
      continue;
    }
    found.push_back({text::trim(lower.substr(open_end, close - open_end)), close_end});
    i = close_end;
  }
  return found;
}

// Matches a surface form at lower[i]; the label must end at a word boundary.
std::optional<StandardLabel> surface_at(std::string_view lower, std::size_t i) {
  for (auto label : {StandardLabel::NonRumor, StandardLabel::Rumor, StandardLabel::Unverified}) {
    auto form = surface(label);
    if (lower.substr(i, form.size()) != form) continue;
    auto end = i + form.size();
    if (end < lower.size() && is_word_char(lower[end])) continue;
    return label;
  }
  return std::nullopt;
}

std::optional<StandardLabel> untagged_label(std::string_view lower) {
  std::optional<StandardLabel> last;
  std::size_t last_pos = 0;
  for (std::string_view phrase : {"labeled as", "labelled as"}) {
    std::size_t pos = 0;
    while ((pos = lower.find(phrase, pos)) != std::string_view::npos) {
      auto i = skip_space(lower, pos + phrase.size());
      while (i < lower.size() && (lower[i] == '"' || lower[i] == '\'')) ++i;
      if (lower.substr(i, 2) == "a ") i = skip_space(lower, i + 2);
      else if (lower.substr(i, 3) == "an ") i = skip_space(lower, i + 3);
      if (auto label = surface_at(lower, i); label && (!last || pos >= last_pos)) {
        last = label;
        last_pos = pos;
      }
      pos += phrase.size();
    }
  }
  return last;
}

constexpr std::string_view kQuoteOpenAscii = "\"";
constexpr std::string_view kQuoteOpenCurly = "\xE2\x80\x9C";
constexpr std::string_view kQuoteCloseCurly = "\xE2\x80\x9D";

// Delimiters that separate list items in free text, ASCII and full-width.
constexpr std::string_view kDelimiters[] = {
    ",", ";", ":", "\n", "(", ")", "\"", "\xE2\x80\x9C", "\xE2\x80\x9D",
    "\xEF\xBC\x8C", "\xE3\x80\x81", "\xEF\xBC\x9A", "\xEF\xBC\x9B"};

constexpr std::string_view kSentenceEnds[] = {". ", "! ", "? "};

struct Candidate {
  std::size_t pos;
  std::string span;
};

std::string strip_item_punctuation(std::string_view s) {
  std::string out = text::trim(s);
  while (!out.empty() && (out.back() == ',' || out.back() == ';' || out.back() == ':')) {
    out.pop_back();
    out = text::rtrim(out);
  }
  for (std::string_view lead : {"and ", "or "}) {
    if (text::starts_with_ci(out, lead)) {
      out = text::trim(std::string_view(out).substr(lead.size()));
      break;
    }
  }
  return out;
}

std::vector<Candidate> quoted_spans(std::string_view s) {
  std::vector<Candidate> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.substr(i, kQuoteOpenAscii.size()) == kQuoteOpenAscii) {
      auto close = s.find('"', i + 1);
      if (close == std::string_view::npos) break;
      out.push_back({i, std::string(s.substr(i + 1, close - i - 1))});
      i = close + 1;
    } else if (s.substr(i, kQuoteOpenCurly.size()) == kQuoteOpenCurly) {
      auto start = i + kQuoteOpenCurly.size();
      auto close = s.find(kQuoteCloseCurly, start);
      if (close == std::string_view::npos) break;
      out.push_back({i, std::string(s.substr(start, close - start))});
      i = close + kQuoteCloseCurly.size();
    } else {
      ++i;
    }
  }
  return out;
}

std::size_t delimiter_width(std::string_view s, std::size_t i) {
  for (auto d : kDelimiters) {
    if (s.substr(i, d.size()) == d) return d.size();
  }
  return 0;
}

bool is_sentence_end(std::string_view s, std::size_t i) {
  for (auto d : kSentenceEnds) {
    if (s.substr(i, d.size()) == d) return true;
  }
  return false;
}

std::vector<Candidate> delimited_segments(std::string_view s) {
  std::vector<Candidate> out;
  std::size_t seg_start = 0;
  auto flush = [&](std::size_t end) {
    if (end > seg_start) out.push_back({seg_start, std::string(s.substr(seg_start, end - seg_start))});
  };
  std::size_t i = 0;
  while (i < s.size()) {
    if (auto w = delimiter_width(s, i)) {
      flush(i);
      i += w;
      seg_start = i;
    } else if (is_sentence_end(s, i)) {
      // the terminator stays with its segment so "This is not true." survives
      flush(i + 1);
      i += 2;
      seg_start = i;
    } else {
      ++i;
    }
  }
  flush(s.size());
  return out;
}

}  // namespace

std::string canonicalize_label(std::string_view s) {
  std::string out = text::normalize_whitespace(text::ascii_lower(s));
  while (!out.empty() && out.back() == '.') {
    out.pop_back();
    out = text::rtrim(out);
  }
  return out;
}

LabelTable LabelTable::parse(std::string_view tsv) {
  LabelTable table;
  std::size_t line_no = 0;
  for (const auto& raw_line : text::split(tsv, '\n')) {
    ++line_no;
    std::string line = raw_line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    auto cols = text::split(line, '\t');
    if (cols.size() != 2 || text::trim(cols[0]).empty()) {
      throw Error(ErrorCode::SchemaViolation, "label table line " + std::to_string(line_no) + ": expected 2 columns");
    }
    auto standard = label_from_surface(cols[1]);
    if (!standard) {
      for (auto l : kAllLabels) {
        if (text::trim(cols[1]) == enum_name(l)) standard = l;
      }
    }
    if (!standard) {
      throw Error(ErrorCode::SchemaViolation,
                  "label table line " + std::to_string(line_no) + ": unknown class '" + cols[1] + "'");
    }
    FineGrainedLabel entry{cols[0], *standard};
    auto key = canonicalize_label(entry.canonical_text);
    if (auto it = table.index_.find(key); it != table.index_.end()) {
      const auto& prior = table.entries_[it->second];
      if (prior.standard != entry.standard) {
        throw Error(ErrorCode::SchemaViolation, "label table: '" + entry.canonical_text + "' collides with '" +
                                                    prior.canonical_text + "' across classes");
      }
    } else {
      table.index_.emplace(key, table.entries_.size());
    }
    table.entries_.push_back(std::move(entry));
  }
  return table;
}

LabelTable LabelTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open label table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const LabelTable& LabelTable::builtin() {
  static const LabelTable table = [] {
    auto t = parse(resources::fine_grained_table_tsv());
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& e : t.entries()) ++counts[to_code(e.standard)];
    const auto non_rumor = counts[to_code(StandardLabel::NonRumor)];
    const auto rumor = counts[to_code(StandardLabel::Rumor)];
    const auto unverified = counts[to_code(StandardLabel::Unverified)];
    if (non_rumor != 10 || unverified != 10 || rumor <= non_rumor) {
      throw Error(ErrorCode::SchemaViolation, "builtin label table is incomplete");
    }
    return t;
  }();
  return table;
}

std::vector<FineGrainedLabel> LabelTable::entries_for(StandardLabel label) const {
  std::vector<FineGrainedLabel> out;
  for (const auto& e : entries_) {
    if (e.standard == label) out.push_back(e);
  }
  return out;
}

const FineGrainedLabel* LabelTable::find(std::string_view s) const {
  auto it = index_.find(canonicalize_label(s));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::optional<StandardLabel> LabelTable::lookup(std::string_view s) const {
  const auto* entry = find(s);
  if (!entry) return std::nullopt;
  return entry->standard;
}

std::optional<StandardLabel> normalize_fine_grained(std::string_view s, const LabelTable& table) {
  return table.lookup(s);
}

std::optional<StandardLabel> extract_label(std::string_view generated) {
  const std::string lower = text::ascii_lower(generated);
  auto tagged = tagged_mentions(lower);
  if (!tagged.empty()) return label_from_surface(tagged.back().content);
  return untagged_label(lower);
}

std::optional<StandardLabel> trailing_terminal_label(std::string_view text) {
  std::string tail = text::rtrim(text::ascii_lower(text));
  if (!tail.empty() && tail.back() == '.') tail = text::rtrim(std::string_view(tail).substr(0, tail.size() - 1));
  auto tagged = tagged_mentions(tail);
  if (tagged.empty() || tagged.back().end != tail.size()) return std::nullopt;
  return label_from_surface(tagged.back().content);
}

std::vector<FineGrainedLabel> extract_fine_grained(std::string_view generated, const LabelTable& table) {
  std::vector<Candidate> candidates = quoted_spans(generated);
  auto segments = delimited_segments(generated);
  candidates.insert(candidates.end(), std::make_move_iterator(segments.begin()),
                    std::make_move_iterator(segments.end()));
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.pos < b.pos; });

  std::vector<FineGrainedLabel> out;
  std::vector<std::string> seen;
  for (const auto& c : candidates) {
    const auto* entry = table.find(strip_item_punctuation(c.span));
    if (!entry) continue;
    auto key = canonicalize_label(entry->canonical_text);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(std::move(key));
    out.push_back(*entry);
  }
  return out;
}

std::string terminal_sentence(StandardLabel label) {
  return "Therefore, the post is labeled as <label> " + std::string(surface(label)) + " </label>.";
}

}  // namespace evidistill

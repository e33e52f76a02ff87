#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evidistill/types.hpp"

namespace evidistill {

// Lowercase (ASCII), collapse internal whitespace, trim, strip trailing
// periods. Idempotent.
std::string canonicalize_label(std::string_view s);

// Closed vocabulary of fact-checker verdicts and their standardized class.
// Entries keep the exact spelling of the source table; lookups go through
// canonicalize_label.
class LabelTable {
 public:
  // Parses "fine_grained<TAB>standard" rows. Throws SchemaViolation on a
  // malformed row, an unknown class, or a canonical-key collision between
  // entries of different classes.
  static LabelTable parse(std::string_view tsv);
  static LabelTable load(const std::filesystem::path& path);

  // The committed table compiled into the library.
  static const LabelTable& builtin();

  const std::vector<FineGrainedLabel>& entries() const { return entries_; }

  // Entries of one class in table order.
  std::vector<FineGrainedLabel> entries_for(StandardLabel label) const;

  // nullopt means Unknown.
  std::optional<StandardLabel> lookup(std::string_view s) const;

  // First table entry whose canonical key equals canonicalize_label(s).
  const FineGrainedLabel* find(std::string_view s) const;

 private:
  std::vector<FineGrainedLabel> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// nullopt is the Unknown value; never throws.
std::optional<StandardLabel> normalize_fine_grained(std::string_view s,
                                                    const LabelTable& table = LabelTable::builtin());

// Scans for the last "<label> X </label>"; falls back to the last untagged
// "labeled as X". nullopt is ParseFailure.
std::optional<StandardLabel> extract_label(std::string_view generated);

// Table entries mentioned as quoted or comma-delimited items, deduplicated by
// canonical key, in first-mention order.
std::vector<FineGrainedLabel> extract_fine_grained(std::string_view generated,
                                                   const LabelTable& table = LabelTable::builtin());

// "Therefore, the post is labeled as <label> rumor </label>."
std::string terminal_sentence(StandardLabel label);

// Label named by a terminal sentence at the very end of `text`, if any.
std::optional<StandardLabel> trailing_terminal_label(std::string_view text);

}  // namespace evidistill

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evidistill/types.hpp"

namespace evidistill {

// Pairs the inference prompt for x with the teacher output. Throws
// IdMismatch when the ids differ.
InstructionRecord assemble_record(const ProcessedInstance& x, const RationaleRecord& r, bool include_image,
                                  const std::optional<std::string>& image_ref = std::nullopt);

enum class AblationKind { Full, NoRationale, NoEvidenceNoRationale };

std::string_view to_string(AblationKind kind);
std::optional<AblationKind> ablation_from_string(std::string_view s);

// Lookup tables the ablations need: the instance behind each record (for
// re-rendering without evidence) and its rationale (for the terminal label).
struct AblationContext {
  std::unordered_map<std::string, const ProcessedInstance*> instances;
  std::unordered_map<std::string, StandardLabel> labels;
};

// Throws MissingInput when a record has no matching instance or label.
std::vector<InstructionRecord> apply_ablation(std::vector<InstructionRecord> records, AblationKind kind,
                                              const AblationContext& context);

// Instance with both evidence lists emptied.
ProcessedInstance strip_evidence(ProcessedInstance x);

struct SplitResult {
  std::vector<InstructionRecord> train;
  std::vector<InstructionRecord> test;
};

// Stratified by the label of each record (labels[i] belongs to records[i]).
// Per class, round(test_fraction * size) records go to test; the rounding
// uses largest remainders so the total stays within one of the target.
// Output preserves input order. Throws EmptyInput, LengthMismatch or
// ConfigInvalid (fraction outside (0, 1)).
SplitResult split_dataset(std::vector<InstructionRecord> records, std::span<const StandardLabel> labels,
                          double test_fraction, std::uint64_t seed);

// Honors a fixed assignment: post_id -> split. Records missing from the
// assignment throw MissingInput.
SplitResult apply_split_assignment(std::vector<InstructionRecord> records,
                                   const std::unordered_map<std::string, Split>& assignment);

// Reads "post_id<TAB>train|test" lines.
std::unordered_map<std::string, Split> parse_split_assignment(std::string_view tsv);

struct ClassCounts {
  std::size_t non_rumor = 0;
  std::size_t rumor = 0;
  std::size_t unverified = 0;

  std::size_t total() const { return non_rumor + rumor + unverified; }
  std::size_t& operator[](StandardLabel label);
  std::size_t operator[](StandardLabel label) const;
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct DatasetStats {
  ClassCounts train;
  ClassCounts test;

  ClassCounts total() const;
  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

struct LabeledRecord {
  Split split = Split::Train;
  StandardLabel label = StandardLabel::Unverified;
};

DatasetStats dataset_stats(std::span<const LabeledRecord> records);

// Aligned table with thousands separators; rows Train, Test, Total.
std::string render_stats_table(const DatasetStats& stats);
// "split\tnon-rumor\trumor\tunverified\ttotal" plus one row per split.
std::string render_stats_tsv(const DatasetStats& stats);
// Inverse of render_stats_tsv (the Total row, if present, is ignored).
// Throws SchemaViolation.
DatasetStats parse_stats_tsv(std::string_view tsv);

enum class LengthUnit { Chars, WhitespaceTokens };

std::string_view to_string(LengthUnit unit);
std::optional<LengthUnit> length_unit_from_string(std::string_view s);

// Code points or whitespace-separated tokens.
std::size_t measure_length(std::string_view text, LengthUnit unit);

struct LengthEntry {
  std::size_t m = 0;  // textual evidence count
  std::size_t n = 0;  // visual evidence count
  std::string text;
};

struct Histogram {
  // (m, n) -> bucket index -> count; bucket b covers [b*width, (b+1)*width)
  std::map<std::pair<std::size_t, std::size_t>, std::map<std::size_t, std::size_t>> groups;
  std::size_t width = 1;

  std::size_t group_size(std::size_t m, std::size_t n) const;
};

// Throws ConfigInvalid when width is 0.
Histogram length_histogram(std::span<const LengthEntry> entries, LengthUnit unit, std::size_t width);

// "m\tn\tlo\thi\tcount" rows sorted by group then bucket.
std::string render_histogram_tsv(const Histogram& h);
Histogram parse_histogram_tsv(std::string_view tsv);

}  // namespace evidistill

#include "evidistill/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "evidistill/error.hpp"
#include "evidistill/labels.hpp"
#include "evidistill/prompt.hpp"
#include "evidistill/text.hpp"

namespace evidistill {

InstructionRecord assemble_record(const ProcessedInstance& x, const RationaleRecord& r, bool include_image,
                                  const std::optional<std::string>& image_ref) {
  if (x.post_id != r.post_id) {
    throw Error(ErrorCode::IdMismatch, "instance '" + x.post_id + "' paired with rationale '" + r.post_id + "'");
  }
  InstructionRecord rec;
  rec.post_id = x.post_id;
  rec.instruction_text = render_inference_prompt(x).text;
  rec.target_text = r.output_text;
  if (include_image) rec.image = image_ref.value_or(x.post_id);
  return rec;
}

std::string_view to_string(AblationKind kind) {
  switch (kind) {
    case AblationKind::Full: return "full";
    case AblationKind::NoRationale: return "no_rationale";
    case AblationKind::NoEvidenceNoRationale: return "no_evidence_no_rationale";
  }
  return "full";
}

std::optional<AblationKind> ablation_from_string(std::string_view s) {
  for (auto k : {AblationKind::Full, AblationKind::NoRationale, AblationKind::NoEvidenceNoRationale}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

ProcessedInstance strip_evidence(ProcessedInstance x) {
  x.textual_evidence.clear();
  x.visual_evidence.clear();
  return x;
}

std::vector<InstructionRecord> apply_ablation(std::vector<InstructionRecord> records, AblationKind kind,
                                              const AblationContext& context) {
  if (kind == AblationKind::Full) return records;
  for (auto& rec : records) {
    auto label = context.labels.find(rec.post_id);
    if (label == context.labels.end()) throw Error(ErrorCode::MissingInput, "no label for '" + rec.post_id + "'");
    rec.target_text = terminal_sentence(label->second);
    if (kind == AblationKind::NoEvidenceNoRationale) {
      auto inst = context.instances.find(rec.post_id);
      if (inst == context.instances.end() || !inst->second) {
        throw Error(ErrorCode::MissingInput, "no instance for '" + rec.post_id + "'");
      }
      rec.instruction_text = render_inference_prompt(strip_evidence(*inst->second)).text;
    }
  }
  return records;
}

namespace {

// Unbiased draw from [0, bound) (Lemire's multiply-shift with rejection).
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

// std::shuffle's draws differ across standard libraries; this one doesn't.
void fisher_yates(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[bounded(rng, i)]);
  }
}

}  // namespace

SplitResult split_dataset(std::vector<InstructionRecord> records, std::span<const StandardLabel> labels,
                          double test_fraction, std::uint64_t seed) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no records to split");
  if (records.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "records and labels differ in length");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, "test fraction must lie in (0, 1)");
  }

  std::array<std::vector<std::size_t>, 3> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[to_code(labels[i])].push_back(i);

  std::array<std::size_t, 3> quota{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double exact = test_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  const auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(records.size())));
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (auto c : order) {
    if (assigned >= target) break;
    if (remainder[c] <= 0.0) continue;
    ++quota[c];
    ++assigned;
  }

  std::mt19937_64 rng(seed);
  std::vector<bool> is_test(records.size(), false);
  for (std::size_t c = 0; c < 3; ++c) {
    auto idx = by_class[c];
    fisher_yates(idx, rng);
    for (std::size_t k = 0; k < quota[c]; ++k) is_test[idx[k]] = true;
  }

  SplitResult out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& rec = records[i];
    rec.split = is_test[i] ? Split::Test : Split::Train;
    (is_test[i] ? out.test : out.train).push_back(std::move(rec));
  }
  return out;
}

SplitResult apply_split_assignment(std::vector<InstructionRecord> records,
                                   const std::unordered_map<std::string, Split>& assignment) {
  SplitResult out;
  for (auto& rec : records) {
    auto it = assignment.find(rec.post_id);
    if (it == assignment.end()) throw Error(ErrorCode::MissingInput, "'" + rec.post_id + "' has no split assignment");
    rec.split = it->second;
    (it->second == Split::Test ? out.test : out.train).push_back(std::move(rec));
  }
  return out;
}

std::unordered_map<std::string, Split> parse_split_assignment(std::string_view tsv) {
  std::unordered_map<std::string, Split> out;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(tsv, '\n')) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto cols = text::split(line, '\t');
    std::optional<Split> split;
    if (cols.size() == 2) split = split_from_string(text::trim(cols[1]));
    if (!split) {
      throw Error(ErrorCode::SchemaViolation, "split assignment line " + std::to_string(line_no) + " is malformed");
    }
    out[text::trim(cols[0])] = *split;
  }
  return out;
}

std::size_t& ClassCounts::operator[](StandardLabel label) {
  switch (label) {
    case StandardLabel::NonRumor: return non_rumor;
    case StandardLabel::Rumor: return rumor;
    case StandardLabel::Unverified: return unverified;
  }
  return unverified;
}

std::size_t ClassCounts::operator[](StandardLabel label) const { return const_cast<ClassCounts&>(*this)[label]; }

ClassCounts DatasetStats::total() const {
  return {train.non_rumor + test.non_rumor, train.rumor + test.rumor, train.unverified + test.unverified};
}

DatasetStats dataset_stats(std::span<const LabeledRecord> records) {
  DatasetStats stats;
  for (const auto& r : records) ++(r.split == Split::Train ? stats.train : stats.test)[r.label];
  return stats;
}

namespace {

struct StatsRow {
  std::string name;
  ClassCounts counts;
};

std::vector<StatsRow> stats_rows(const DatasetStats& stats) {
  return {{"Train", stats.train}, {"Test", stats.test}, {"Total", stats.total()}};
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_stats_table(const DatasetStats& stats) {
  const std::vector<std::string> header = {"Set", "Non-rumor", "Rumor", "Unverified", "Total"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : stats_rows(stats)) {
    const auto& c = r.counts;
    rows.push_back({r.name, text::thousands(static_cast<long long>(c.non_rumor)),
                    text::thousands(static_cast<long long>(c.rumor)),
                    text::thousands(static_cast<long long>(c.unverified)),
                    text::thousands(static_cast<long long>(c.total()))});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    width[i] = header[i].size();
    for (const auto& row : rows) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out = pad_right(cells[0], width[0]);
    for (std::size_t i = 1; i < cells.size(); ++i) out += "  " + pad_left(cells[i], width[i]);
    return out + "\n";
  };
  std::string out = line(header);
  for (const auto& row : rows) out += line(row);
  return out;
}

std::string render_stats_tsv(const DatasetStats& stats) {
  std::string out = "split\tnon-rumor\trumor\tunverified\ttotal\n";
  for (const auto& r : stats_rows(stats)) {
    out += text::ascii_lower(r.name) + "\t" + std::to_string(r.counts.non_rumor) + "\t" +
           std::to_string(r.counts.rumor) + "\t" + std::to_string(r.counts.unverified) + "\t" +
           std::to_string(r.counts.total()) + "\n";
  }
  return out;
}

DatasetStats parse_stats_tsv(std::string_view tsv) {
  DatasetStats stats;
  bool seen_train = false;
  bool seen_test = false;
  auto number = [](std::string s) {
    s.erase(std::remove(s.begin(), s.end(), ','), s.end());
    s = text::trim(s);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorCode::SchemaViolation, "stats table: '" + s + "' is not a count");
    }
    return static_cast<std::size_t>(std::stoull(s));
  };
  for (const auto& raw : text::split(tsv, '\n')) {
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto cols = text::split(line, '\t');
    const auto name = text::ascii_lower(text::trim(cols[0]));
    if (name == "split" || name == "set" || name == "total") continue;
    if (cols.size() < 4) throw Error(ErrorCode::SchemaViolation, "stats table row needs 4 columns: " + line);
    ClassCounts c{number(cols[1]), number(cols[2]), number(cols[3])};
    if (cols.size() >= 5 && number(cols[4]) != c.total()) {
      throw Error(ErrorCode::SchemaViolation, "stats table row '" + cols[0] + "' has an inconsistent total");
    }
    if (name == "train") {
      stats.train = c;
      seen_train = true;
    } else if (name == "test") {
      stats.test = c;
      seen_test = true;
    } else {
      throw Error(ErrorCode::SchemaViolation, "stats table: unknown split '" + cols[0] + "'");
    }
  }
  if (!seen_train && !seen_test) throw Error(ErrorCode::SchemaViolation, "stats table has no train/test rows");
  return stats;
}

std::string_view to_string(LengthUnit unit) {
  return unit == LengthUnit::Chars ? "chars" : "whitespace_tokens";
}

std::optional<LengthUnit> length_unit_from_string(std::string_view s) {
  if (s == "chars") return LengthUnit::Chars;
  if (s == "whitespace_tokens" || s == "tokens") return LengthUnit::WhitespaceTokens;
  return std::nullopt;
}

std::size_t measure_length(std::string_view s, LengthUnit unit) {
  return unit == LengthUnit::Chars ? text::utf8_length(s) : text::split_whitespace(s).size();
}

std::size_t Histogram::group_size(std::size_t m, std::size_t n) const {
  auto it = groups.find({m, n});
  if (it == groups.end()) return 0;
  std::size_t total = 0;
  for (const auto& [_, count] : it->second) total += count;
  return total;
}

Histogram length_histogram(std::span<const LengthEntry> entries, LengthUnit unit, std::size_t width) {
  if (width == 0) throw Error(ErrorCode::ConfigInvalid, "bucket width must be > 0");
  Histogram h;
  h.width = width;
  for (const auto& e : entries) ++h.groups[{e.m, e.n}][measure_length(e.text, unit) / width];
  return h;
}

std::string render_histogram_tsv(const Histogram& h) {
  std::string out = "m\tn\tlo\thi\tcount\n";
  for (const auto& [group, buckets] : h.groups) {
    for (const auto& [b, count] : buckets) {
      out += std::to_string(group.first) + "\t" + std::to_string(group.second) + "\t" + std::to_string(b * h.width) +
             "\t" + std::to_string((b + 1) * h.width) + "\t" + std::to_string(count) + "\n";
    }
  }
  return out;
}

Histogram parse_histogram_tsv(std::string_view tsv) {
  Histogram h;
  bool width_known = false;
  for (const auto& raw : text::split(tsv, '\n')) {
    auto line = text::trim(raw);
    if (line.empty() || line.rfind("m\t", 0) == 0) continue;
    auto cols = text::split(line, '\t');
    if (cols.size() != 5) throw Error(ErrorCode::SchemaViolation, "histogram row needs 5 columns: " + line);
    try {
      const auto m = std::stoull(cols[0]);
      const auto n = std::stoull(cols[1]);
      const auto lo = std::stoull(cols[2]);
      const auto hi = std::stoull(cols[3]);
      if (hi <= lo) throw Error(ErrorCode::SchemaViolation, "histogram bucket is empty: " + line);
      if (!width_known) {
        h.width = hi - lo;
        width_known = true;
      }
      h.groups[{m, n}][lo / h.width] += std::stoull(cols[4]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::SchemaViolation, "histogram row is not numeric: " + line);
    }
  }
  return h;
}

}  // namespace evidistill

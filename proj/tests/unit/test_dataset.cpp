#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "evidistill/dataset.hpp"
#include "evidistill/error.hpp"
#include "evidistill/labels.hpp"
#include "evidistill/prompt.hpp"
#include "evidistill/serialization.hpp"
#include "evidistill/teacher.hpp"
#include "support/synthetic.hpp"

using namespace evidistill;

namespace {

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return std::string(to_string(e.code()));
  }
  return "none";
}

RationaleRecord rationale_for(const ProcessedInstance& x, StandardLabel g) {
  RationaleRecord r;
  r.post_id = x.post_id;
  r.output_text = append_label_suffix("Some explanation about " + x.post_id + ".", g);
  r.terminal_label = g;
  return r;
}

std::vector<InstructionRecord> records(std::size_t n) {
  std::vector<InstructionRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"r" + std::to_string(i), "prompt", std::nullopt, "target"});
  return out;
}

}  // namespace

TEST(Assemble, ImageReferenceToggle) {
  ProcessedInstance x;
  x.post_id = "a";
  x.text = "t";
  x.digest.caption_text = "c";
  const auto r = rationale_for(x, StandardLabel::Rumor);
  const auto without = assemble_record(x, r, false);
  EXPECT_EQ(without.image, std::nullopt);
  EXPECT_EQ(without.instruction_text, render_inference_prompt(x).text);
  EXPECT_EQ(without.target_text, r.output_text);
  EXPECT_EQ(assemble_record(x, r, true).image, "a");
  EXPECT_EQ(assemble_record(x, r, true, "posts/images/a.png").image, "posts/images/a.png");
  auto other = r;
  other.post_id = "b";
  EXPECT_EQ(code_of([&] { assemble_record(x, other, false); }), "IdMismatch");
}

TEST(Ablation, TargetsAndInstructions) {
  std::mt19937_64 rng(5);
  std::vector<ProcessedInstance> xs;
  for (int i = 0; i < 50; ++i) {
    auto x = synth::random_instance(rng, 4);
    x.post_id = "x" + std::to_string(i);
    xs.push_back(x);
  }
  AblationContext ctx;
  std::vector<InstructionRecord> full;
  for (const auto& x : xs) {
    const auto g = synth::random_label(rng);
    ctx.instances[x.post_id] = &x;
    ctx.labels[x.post_id] = g;
    full.push_back(assemble_record(x, rationale_for(x, g), false));
  }
  EXPECT_EQ(apply_ablation(full, AblationKind::Full, ctx), full);

  const auto no_rat = apply_ablation(full, AblationKind::NoRationale, ctx);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < no_rat.size(); ++i) {
    EXPECT_EQ(no_rat[i].target_text, terminal_sentence(ctx.labels[no_rat[i].post_id]));
    EXPECT_EQ(no_rat[i].instruction_text, full[i].instruction_text);
    if (extract_label(no_rat[i].target_text) == ctx.labels[no_rat[i].post_id]) ++ok;
  }
  EXPECT_EQ(ok, no_rat.size());

  const auto bare = apply_ablation(full, AblationKind::NoEvidenceNoRationale, ctx);
  for (const auto& r : bare) {
    EXPECT_NE(r.instruction_text.find("Textual_evidence: \nImage_evidence: \n"), std::string::npos);
    EXPECT_EQ(r.target_text, terminal_sentence(ctx.labels[r.post_id]));
  }

  AblationContext empty;
  EXPECT_EQ(code_of([&] { apply_ablation(full, AblationKind::NoRationale, empty); }), "MissingInput");
  EXPECT_EQ(ablation_from_string("no_evidence_no_rationale"), AblationKind::NoEvidenceNoRationale);
  EXPECT_EQ(ablation_from_string("bogus"), std::nullopt);
}

TEST(Split, StratifiedSizes) {
  auto recs = records(100);
  std::vector<StandardLabel> labels;
  for (std::size_t i = 0; i < 100; ++i) {
    labels.push_back(i < 34 ? StandardLabel::Rumor : i < 67 ? StandardLabel::NonRumor : StandardLabel::Unverified);
  }
  const auto s = split_dataset(recs, labels, 0.1, 7);
  EXPECT_GE(s.test.size(), 9u);
  EXPECT_LE(s.test.size(), 11u);
  std::map<std::string, StandardLabel> label_of;
  for (std::size_t i = 0; i < 100; ++i) label_of[recs[i].post_id] = labels[i];
  std::map<StandardLabel, std::size_t> per_class;
  for (const auto& r : s.test) ++per_class[label_of[r.post_id]];
  for (auto [l, n] : per_class) {
    EXPECT_TRUE(n == 3 || n == 4) << enum_name(l);
    const double size = l == StandardLabel::Rumor ? 34 : 33;
    EXPECT_LE(std::abs(n / size - 0.1), 1 / size);
  }

  // coverage, disjointness, order
  std::set<std::string> train_ids, test_ids;
  for (const auto& r : s.train) train_ids.insert(r.post_id);
  for (const auto& r : s.test) test_ids.insert(r.post_id);
  EXPECT_EQ(train_ids.size() + test_ids.size(), 100u);
  for (const auto& id : test_ids) EXPECT_EQ(train_ids.count(id), 0u);
  for (const auto& r : s.train) EXPECT_EQ(r.split, Split::Train);
  for (const auto& r : s.test) EXPECT_EQ(r.split, Split::Test);
  for (std::size_t i = 1; i < s.test.size(); ++i) {
    EXPECT_LT(std::stoi(s.test[i - 1].post_id.substr(1)), std::stoi(s.test[i].post_id.substr(1)));
  }

  const auto again = split_dataset(recs, labels, 0.1, 7);
  EXPECT_EQ(again.train, s.train);
  EXPECT_EQ(again.test, s.test);
  EXPECT_NE(split_dataset(recs, labels, 0.1, 8).test, s.test);
}

TEST(Split, Errors) {
  std::vector<StandardLabel> labels(3, StandardLabel::Rumor);
  EXPECT_EQ(code_of([&] { split_dataset({}, {}, 0.1, 1); }), "EmptyInput");
  EXPECT_EQ(code_of([&] { split_dataset(records(2), labels, 0.1, 1); }), "LengthMismatch");
  EXPECT_EQ(code_of([&] { split_dataset(records(3), labels, 1.0, 1); }), "ConfigInvalid");
  EXPECT_EQ(code_of([&] { split_dataset(records(3), labels, 0.0, 1); }), "ConfigInvalid");
}

TEST(Split, FixedAssignmentPassThrough) {
  const auto assignment = parse_split_assignment("r0\ttest\nr1\ttrain\nr2\ttest\n");
  const auto s = apply_split_assignment(records(3), assignment);
  ASSERT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.test[0].post_id, "r0");
  EXPECT_EQ(s.test[1].post_id, "r2");
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_EQ(code_of([&] { apply_split_assignment(records(4), assignment); }), "MissingInput");
}

TEST(Stats, PublishedCountsFixture) {
  const auto stats = parse_stats_tsv(synth::read_file(std::string(EVIDISTILL_FIXTURE_DIR) + "/published_counts.tsv"));
  EXPECT_EQ(stats.train.total(), 11184u);
  EXPECT_EQ(stats.test.total(), 1309u);
  EXPECT_EQ(stats.total().total(), 12493u);
  const auto table = render_stats_table(stats);
  EXPECT_NE(table.find("11,184"), std::string::npos);
  EXPECT_NE(table.find("1,309"), std::string::npos);
  EXPECT_NE(table.find("12,493"), std::string::npos);
  EXPECT_EQ(parse_stats_tsv(render_stats_tsv(stats)), stats);
}

TEST(Stats, SmallCases) {
  EXPECT_EQ(dataset_stats({}).total().total(), 0u);
  const std::vector<LabeledRecord> three{{Split::Train, StandardLabel::NonRumor},
                                         {Split::Train, StandardLabel::Rumor},
                                         {Split::Train, StandardLabel::Unverified}};
  const auto s = dataset_stats(three);
  EXPECT_EQ(s.train, (ClassCounts{1, 1, 1}));
  EXPECT_EQ(s.train.total(), 3u);
  EXPECT_EQ(s.test.total(), 0u);
  EXPECT_EQ(code_of([] { parse_stats_tsv("train\t1\t2\n"); }), "SchemaViolation");
}

TEST(Histogram, BucketsAndConservation) {
  const std::vector<LengthEntry> two{{1, 1, std::string(10, 'a')}, {1, 1, std::string(25, 'b')}};
  const auto h = length_histogram(two, LengthUnit::Chars, 10);
  const auto& g = h.groups.at({1, 1});
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g.at(1), 1u);
  EXPECT_EQ(g.at(2), 1u);
  EXPECT_EQ(code_of([&] { length_histogram(two, LengthUnit::Chars, 0); }), "ConfigInvalid");

  std::mt19937_64 rng(3);
  std::vector<LengthEntry> many;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> direct;
  for (int i = 0; i < 500; ++i) {
    LengthEntry e{rng() % 4, rng() % 4, std::string(rng() % 300, 'x')};
    ++direct[{e.m, e.n}];
    many.push_back(std::move(e));
  }
  const auto hm = length_histogram(many, LengthUnit::Chars, 50);
  std::size_t total = 0;
  for (const auto& [key, count] : direct) {
    EXPECT_EQ(hm.group_size(key.first, key.second), count);
    total += hm.group_size(key.first, key.second);
  }
  EXPECT_EQ(total, many.size());
  const auto back = parse_histogram_tsv(render_histogram_tsv(hm));
  EXPECT_EQ(back.groups, hm.groups);
}

TEST(Histogram, Units) {
  EXPECT_EQ(measure_length("网传 消息", LengthUnit::Chars), 5u);
  EXPECT_EQ(measure_length("  a b\n c ", LengthUnit::WhitespaceTokens), 3u);
}

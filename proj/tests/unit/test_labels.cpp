#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "json.hpp"
#include "evidistill/error.hpp"
#include "evidistill/labels.hpp"
#include "evidistill/prompt.hpp"
#include "evidistill/teacher.hpp"
#include "evidistill/text.hpp"

using namespace evidistill;

namespace {

std::vector<nlohmann::json> case_study_outputs() {
  std::ifstream in(std::string(EVIDISTILL_FIXTURE_DIR) + "/case_study_outputs.jsonl");
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

std::vector<std::string> names(const std::vector<FineGrainedLabel>& labels) {
  std::vector<std::string> out;
  for (const auto& l : labels) out.push_back(l.canonical_text);
  return out;
}

}  // namespace

TEST(LabelTable, EveryCommittedRowMapsToItsPrintedClass) {
  std::ifstream in(std::string(EVIDISTILL_SOURCE_DIR) + "/data/fine_grained_labels.tsv");
  std::string line;
  std::size_t rows = 0;
  const auto& table = LabelTable::builtin();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cols = text::split(line, '\t');
    ASSERT_EQ(cols.size(), 2u) << line;
    auto expected = label_from_surface(cols[1]);
    ASSERT_TRUE(expected) << line;
    EXPECT_EQ(normalize_fine_grained(cols[0], table), expected) << cols[0];
    ++rows;
  }
  EXPECT_EQ(rows, table.entries().size());
  EXPECT_EQ(table.entries_for(StandardLabel::NonRumor).size(), 10u);
  EXPECT_EQ(table.entries_for(StandardLabel::Unverified).size(), 10u);
  EXPECT_GT(table.entries_for(StandardLabel::Rumor).size(), 10u);
}

TEST(LabelTable, SpotEntries) {
  const auto& t = LabelTable::builtin();
  EXPECT_EQ(normalize_fine_grained("Three Pinocchios", t), StandardLabel::Rumor);
  EXPECT_EQ(normalize_fine_grained("Mostly True", t), StandardLabel::NonRumor);
  EXPECT_EQ(normalize_fine_grained("No Evidence", t), StandardLabel::Unverified);
  EXPECT_EQ(normalize_fine_grained("  three pinocchios ", t), StandardLabel::Rumor);
  EXPECT_EQ(normalize_fine_grained("Completely Bogus", t), std::nullopt);
  EXPECT_EQ(normalize_fine_grained("Misleading.", t), StandardLabel::Rumor);
  EXPECT_EQ(normalize_fine_grained("It’s A Joke", t), normalize_fine_grained("it’s a  joke", t));
}

TEST(LabelTable, CanonicalizationIsIdempotent) {
  const auto& t = LabelTable::builtin();
  for (std::string s : {"  Mostly   TRUE.. ", "Misleading.", "No Evidence", "x", "", " . "}) {
    const auto c = canonicalize_label(s);
    EXPECT_EQ(canonicalize_label(c), c) << s;
    EXPECT_EQ(normalize_fine_grained(s, t), normalize_fine_grained(c, t)) << s;
  }
}

TEST(LabelTable, CrossClassCollisionIsRejected) {
  EXPECT_NO_THROW(LabelTable::parse("Misleading\trumor\nMisleading.\trumor\n"));
  try {
    LabelTable::parse("Hoax\trumor\nhoax.\tnon-rumor\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
  }
}

TEST(LabelTable, PromptBlockLabelsMapBackToTheirClass) {
  const auto& t = LabelTable::builtin();
  for (auto l : kAllLabels) {
    for (const auto& e : t.entries_for(l)) EXPECT_EQ(normalize_fine_grained(e.canonical_text, t), l);
  }
}

TEST(ExtractLabel, TaggedFormsAndFallbacks) {
  EXPECT_EQ(extract_label("…labeled as <label> non-rumor </label>."), StandardLabel::NonRumor);
  EXPECT_EQ(extract_label("x <LABEL>Unverified</LABEL>"), StandardLabel::Unverified);
  EXPECT_EQ(extract_label("x < label >\n rumor \n</ label >"), StandardLabel::Rumor);
  EXPECT_EQ(extract_label("I cannot decide."), std::nullopt);
  EXPECT_EQ(extract_label(""), std::nullopt);
  EXPECT_EQ(extract_label("The post is labeled as a rumor because reasons."), StandardLabel::Rumor);
  EXPECT_EQ(extract_label("labeled as non-rumor at first, but it is labelled as \"unverified\"."),
            StandardLabel::Unverified);
  // the tagged form wins over a later untagged sentence
  EXPECT_EQ(extract_label("<label> rumor </label> then labeled as non-rumor"), StandardLabel::Rumor);
  // last tagged mention wins
  EXPECT_EQ(extract_label("<label> rumor </label> ... <label> non-rumor </label>"), StandardLabel::NonRumor);
  EXPECT_EQ(extract_label("<label> maybe </label>"), std::nullopt);
  EXPECT_EQ(extract_label("labeled as rumors"), std::nullopt);
}

TEST(ExtractLabel, CaseStudyOutputsAllExtractToRumor) {
  auto cases = case_study_outputs();
  ASSERT_EQ(cases.size(), 6u);
  for (const auto& c : cases) {
    EXPECT_EQ(extract_label(c["output"].get<std::string>()), StandardLabel::Rumor) << c["id"];
  }
}

TEST(ExtractFineGrained, CaseStudyMentions) {
  const auto& t = LabelTable::builtin();
  for (const auto& c : case_study_outputs()) {
    EXPECT_EQ(names(extract_fine_grained(c["output"].get<std::string>(), t)),
              c["fine_grained"].get<std::vector<std::string>>())
        << c["id"];
  }
}

TEST(ExtractFineGrained, QuotedListKeepsOnlyTableEntries) {
  const auto& t = LabelTable::builtin();
  EXPECT_EQ(names(extract_fine_grained("include \"Misleading\", \"Lacks Context\", and \"Unverified\".", t)),
            (std::vector<std::string>{"Misleading", "Lacks Context"}));
  EXPECT_TRUE(extract_fine_grained("nothing relevant here", t).empty());
  EXPECT_EQ(names(extract_fine_grained("\"Misleading\" and again \"Misleading.\"", t)),
            (std::vector<std::string>{"Misleading"}));
  EXPECT_EQ(names(extract_fine_grained("标签：Mostly True，No Evidence", t)),
            (std::vector<std::string>{"Mostly True", "No Evidence"}));
}

TEST(LabelSuffix, AppendsTerminalSentence) {
  const auto out = append_label_suffix("explanation text", StandardLabel::Rumor);
  EXPECT_EQ(out, "explanation text Therefore, the post is labeled as <label> rumor </label>.");
  EXPECT_EQ(append_label_suffix("", StandardLabel::Unverified), terminal_sentence(StandardLabel::Unverified));
}

TEST(LabelSuffix, IdempotentAndConflictDetecting) {
  const auto once = append_label_suffix("because evidence conflicts.", StandardLabel::Rumor);
  EXPECT_EQ(append_label_suffix(once, StandardLabel::Rumor), once);
  EXPECT_EQ(append_label_suffix("x labeled as <label> rumor </label>  \n", StandardLabel::Rumor),
            "x labeled as <label> rumor </label>  \n");
  try {
    append_label_suffix("so labeled as <label> non-rumor </label>.", StandardLabel::Rumor);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LabelConflict);
  }
  // a mention that is not at the end is not a terminal sentence
  const auto mid = append_label_suffix("<label> non-rumor </label> was wrong", StandardLabel::Rumor);
  EXPECT_EQ(extract_label(mid), StandardLabel::Rumor);
}

TEST(LabelSuffix, RoundTripProperty) {
  std::mt19937_64 rng(11);
  const char* pieces[] = {"because", "<label> rumor </label>", "labeled as non-rumor", ".", "\n", "unverified",
                          "<label>", "</label>", "ok", "  ", "网传", "non-rumor </label>."};
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    for (int k = 0, n = static_cast<int>(rng() % 8); k < n; ++k) s += std::string(pieces[rng() % 12]) + " ";
    for (auto g : kAllLabels) {
      try {
        const auto out = append_label_suffix(s, g);
        EXPECT_EQ(extract_label(out), g) << s;
        EXPECT_EQ(append_label_suffix(out, g), out);
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LabelConflict);
        ASSERT_TRUE(trailing_terminal_label(s));
        EXPECT_NE(*trailing_terminal_label(s), g);
      }
    }
  }
}

#include <gtest/gtest.h>

#include <deque>

#include "json.hpp"
#include "evidistill/error.hpp"
#include "evidistill/hash.hpp"
#include "evidistill/log.hpp"
#include "evidistill/retrieval.hpp"
#include "support/synthetic.hpp"

using namespace evidistill;
using nlohmann::json;

namespace {

// Engines replaying a queue of outcomes: a string is a response, an error
// code is thrown.
struct Outcome {
  std::optional<std::string> body;
  ErrorCode code = ErrorCode::NetworkFailure;
};

std::string reverse_body(std::size_t n) {
  json results = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    results.push_back({{"title", "page " + std::to_string(i)}, {"description", "d"}, {"url", "https://e/" + std::to_string(i)}});
  }
  return json{{"results", results}}.dump();
}

class QueueReverse final : public ReverseImageEngine {
 public:
  std::deque<Outcome> script;
  int* calls;
  explicit QueueReverse(int* c) : calls(c) {}
  std::string id() const override { return "reverse-queue"; }
  std::string query(std::string_view) override {
    ++*calls;
    Outcome o = script.empty() ? Outcome{reverse_body(0)} : script.front();
    if (!script.empty()) script.pop_front();
    if (!o.body) throw Error(o.code, "scripted failure");
    return *o.body;
  }
  std::vector<TextualEvidence> parse(std::string_view raw) const override {
    return parse_generic_reverse_response(raw);
  }
};

class QueueSearch final : public ImageSearchEngine {
 public:
  std::deque<Outcome> script;
  int* calls;
  explicit QueueSearch(int* c) : calls(c) {}
  std::string id() const override { return "search-queue"; }
  std::string query(std::string_view) override {
    ++*calls;
    Outcome o = script.empty() ? Outcome{std::string(R"({"results":[]})")} : script.front();
    if (!script.empty()) script.pop_front();
    if (!o.body) throw Error(o.code, "scripted failure");
    return *o.body;
  }
  std::vector<RawImageHit> parse(std::string_view raw) const override { return parse_generic_image_response(raw); }
};

struct Rig {
  synth::TempDir dir{"retrieval"};
  int reverse_calls = 0;
  int search_calls = 0;
  QueueReverse* reverse = nullptr;
  QueueSearch* search = nullptr;
  std::shared_ptr<RequestGate> gate = std::make_shared<RequestGate>();
  std::vector<double> sleeps;

  EvidenceRetriever make(RetrievalConfig cfg = {}) {
    if (cfg.cache_dir.empty()) cfg.cache_dir = dir.path() / "cache";
    auto r = std::make_unique<QueueReverse>(&reverse_calls);
    auto s = std::make_unique<QueueSearch>(&search_calls);
    reverse = r.get();
    search = s.get();
    return EvidenceRetriever(cfg, std::move(r), std::move(s), gate, nullptr,
                             [this](std::chrono::duration<double> d) { sleeps.push_back(d.count()); });
  }
};

std::vector<TextualEvidence> textual(std::size_t n) {
  std::vector<TextualEvidence> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"t" + std::to_string(i), "d", std::nullopt, i});
  return out;
}

std::vector<VisualEvidence> visual(std::size_t n) {
  std::vector<VisualEvidence> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"v" + std::to_string(i), "", "c", std::nullopt, i});
  return out;
}

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return std::string(to_string(e.code()));
  }
  return "none";
}

}  // namespace

TEST(ReverseImageSearch, PreservesEngineOrder) {
  Rig rig;
  auto r = rig.make();
  rig.reverse->script.push_back({reverse_body(3)});
  const auto img = ImageRef::from_bytes(synth::fake_png("a"));
  const auto hits = r.reverse_image_search(img);
  ASSERT_EQ(hits.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(hits[i].rank, i);
  EXPECT_EQ(hits[1].title, "page 1");
  EXPECT_EQ(hits[1].source_url, "https://e/1");
}

TEST(ReverseImageSearch, ZeroHitsIsEmpty) {
  Rig rig;
  auto r = rig.make();
  EXPECT_TRUE(r.reverse_image_search(ImageRef::from_bytes(synth::fake_png("z"))).empty());
}

TEST(ReverseImageSearch, OfflineReplayMatchesOnline) {
  Rig rig;
  const auto img = ImageRef::from_bytes(synth::fake_png("a"));
  auto online = rig.make();
  rig.reverse->script.push_back({reverse_body(4)});
  const auto first = online.reverse_image_search(img);
  RetrievalConfig off;
  off.offline_mode = true;
  auto offline = rig.make(off);
  EXPECT_EQ(offline.reverse_image_search(img), first);
  EXPECT_EQ(rig.reverse_calls, 1);
  EXPECT_EQ(rig.gate->requests(), 1u);
  EXPECT_EQ(code_of([&] { offline.reverse_image_search(ImageRef::from_bytes(synth::fake_png("b"))); }), "OfflineMiss");
}

TEST(ReverseImageSearch, QuotaExhaustsRetries) {
  Rig rig;
  RetrievalConfig cfg;
  cfg.retry = {3, 0.25};
  auto r = rig.make(cfg);
  for (int i = 0; i < 3; ++i) rig.reverse->script.push_back({std::nullopt, ErrorCode::QuotaExceeded});
  EXPECT_EQ(code_of([&] { r.reverse_image_search(ImageRef::from_bytes(synth::fake_png("q"))); }), "QuotaExceeded");
  EXPECT_EQ(rig.reverse_calls, 3);
  EXPECT_EQ(rig.sleeps, (std::vector<double>{0.25, 0.5}));
}

TEST(TextSearch, EmptyQuery) {
  Rig rig;
  auto r = rig.make();
  EXPECT_EQ(code_of([&] { r.text_search_images("   \n"); }), "EmptyQuery");
  EXPECT_EQ(rig.search_calls, 0);
}

TEST(TextSearch, RanksAndRetryAfterFlap) {
  Rig rig;
  auto r = rig.make();
  rig.search->script.push_back({std::nullopt, ErrorCode::NetworkFailure});
  rig.search->script.push_back(
      {std::string(R"({"results":[{"title":"a","image_url":"x.png"},{"title":"b","image_url":"y.png","source_url":"s"}]})")});
  const auto hits = r.text_search_images("query");
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].rank, 0u);
  EXPECT_EQ(hits[1].rank, 1u);
  EXPECT_EQ(hits[1].source_url, "s");
  EXPECT_EQ(rig.search_calls, 2);
  EXPECT_EQ(rig.gate->requests(), 2u);
}

TEST(TextSearch, NonRetryableErrorPropagatesAtOnce) {
  Rig rig;
  auto r = rig.make();
  rig.search->script.push_back({std::nullopt, ErrorCode::SchemaViolation});
  EXPECT_EQ(code_of([&] { r.text_search_images("q"); }), "SchemaViolation");
  EXPECT_EQ(rig.search_calls, 1);
}

TEST(DigestVisualEvidence, CompositionAndDrops) {
  Rig rig;
  auto r = rig.make();
  const std::string good = synth::fake_png("good");
  FixtureTable ocr, cap;
  cap.add(sha256_hex(good), "c");
  VisualProcessor vp(make_mock_backend(ocr), make_mock_backend(cap), nullptr);
  synth::write_file(rig.dir.path() / "good.png", good);
  auto fetcher = make_default_fetcher(rig.dir.path());

  RawImageHit hit;
  hit.title = "x";
  hit.image_url = "good.png";
  auto ev = r.digest_visual_evidence(hit, vp, *fetcher);
  ASSERT_TRUE(ev);
  EXPECT_EQ(*ev, (VisualEvidence{"x", "", "c", std::nullopt, 0}));

  log::CaptureWarnings warnings;
  RawImageHit missing = hit;
  missing.image_url = "missing.png";
  EXPECT_FALSE(r.digest_visual_evidence(missing, vp, *fetcher));
  EXPECT_EQ(warnings.messages().size(), 1u);

  std::size_t kept = 0;
  for (int i = 0; i < 5; ++i) {
    RawImageHit h = hit;
    h.rank = static_cast<std::size_t>(i);
    if (i == 2) h.image_bytes = "garbage";
    if (r.digest_visual_evidence(h, vp, *fetcher)) ++kept;
  }
  EXPECT_EQ(kept, 4u);
}

TEST(SelectEvidence, CapsCounts) {
  const auto b = select_evidence(textual(10), visual(10), 3, 3);
  ASSERT_EQ(b.textual.size(), 3u);
  ASSERT_EQ(b.visual.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(b.textual[i].rank, i);
    EXPECT_EQ(b.visual[i].rank, i);
  }
  const auto none = select_evidence(textual(10), visual(10), 0, 0);
  EXPECT_TRUE(none.textual.empty());
  EXPECT_TRUE(none.visual.empty());
}

TEST(SelectEvidence, DedupKeepsLowestRank) {
  auto t = textual(6);
  t[4].title = t[0].title;
  t[4].description = t[0].description;
  const auto b = select_evidence(t, {}, 2, 0);
  ASSERT_EQ(b.textual.size(), 2u);
  EXPECT_EQ(b.textual[0].rank, 0u);
  EXPECT_EQ(b.textual[1].rank, 1u);
  const auto again = select_evidence(b.textual, b.visual, 2, 0);
  EXPECT_EQ(again, b);
}

TEST(SelectEvidence, CharCapCountsCodePoints) {
  std::vector<TextualEvidence> t{{"网传消息网传消息", "abcdef", std::nullopt, 0}};
  const auto b = select_evidence(t, {}, 3, 3, 4);
  EXPECT_EQ(b.textual[0].title, "网传消息");
  EXPECT_EQ(b.textual[0].description, "abcd");
}

TEST(RetrievalConfig, Validation) {
  RetrievalConfig c;
  c.max_textual = 11;
  c.max_visual = 10;
  EXPECT_EQ(code_of([&] { c.validate(); }), "ConfigInvalid");
  RetrievalConfig off;
  off.offline_mode = true;
  EXPECT_EQ(code_of([&] { off.validate(); }), "ConfigInvalid");
}

TEST(FixtureEngines, KeyedReplay) {
  synth::TempDir dir("fixture-engines");
  const std::string img = synth::fake_png("p");
  synth::write_file(dir.path() / "rev.json",
                    json{{sha256_hex(img), json::array({{{"title", "T"}, {"description", "D"}}})}}.dump());
  synth::write_file(dir.path() / "search.json",
                    json{{"some query", json::array({{{"title", "I"}, {"image_url", "i.png"}}})}}.dump());
  auto rev = make_fixture_reverse_engine(dir.path() / "rev.json");
  auto search = make_fixture_image_engine(dir.path() / "search.json");
  EXPECT_EQ(rev->parse(rev->query(img)).size(), 1u);
  EXPECT_TRUE(rev->parse(rev->query("other")).empty());
  EXPECT_EQ(search->parse(search->query("some query"))[0].image_url, "i.png");
  EXPECT_EQ(code_of([&] { make_fixture_image_engine(dir.path() / "absent.json"); }), "MissingInput");
}

TEST(Parsers, GoogleVisionAndCse) {
  const auto vision = parse_google_vision_response(R"({"responses":[{"webDetection":{"pagesWithMatchingImages":[
      {"url":"https://a","pageTitle":"<b>Shark</b> on highway"},{"url":"https://b"},{"url":"https://c","pageTitle":"Two"}]}}]})");
  ASSERT_EQ(vision.size(), 2u);
  EXPECT_EQ(vision[0].title, "Shark on highway");
  EXPECT_EQ(vision[1].rank, 2u);
  EXPECT_EQ(code_of([] { parse_google_vision_response(R"({"responses":[{"error":{"code":403}}]})"); }),
            "NetworkFailure");
  const auto cse = parse_google_cse_response(
      R"({"items":[{"title":"x","link":"https://img/1.jpg","image":{"contextLink":"https://page"}}]})");
  ASSERT_EQ(cse.size(), 1u);
  EXPECT_EQ(cse[0].source_url, "https://page");
  EXPECT_TRUE(parse_google_cse_response("{}").empty());
  EXPECT_EQ(code_of([] { parse_generic_reverse_response("not json"); }), "SchemaViolation");
}

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "evidistill/cache.hpp"
#include "evidistill/error.hpp"
#include "evidistill/hash.hpp"
#include "evidistill/image.hpp"
#include "evidistill/log.hpp"
#include "evidistill/parallel.hpp"
#include "evidistill/request_gate.hpp"
#include "evidistill/retry.hpp"
#include "evidistill/serialization.hpp"
#include "evidistill/subprocess.hpp"
#include "evidistill/text.hpp"
#include "evidistill/types.hpp"
#include "support/synthetic.hpp"

using namespace evidistill;
namespace fs = std::filesystem;

TEST(Text, NormalizeWhitespaceCollapsesRuns) {
  EXPECT_EQ(text::normalize_whitespace("a\n\n b "), "a b");
  EXPECT_EQ(text::normalize_whitespace("  \t "), "");
  const std::string once = text::normalize_whitespace(" x \r\n y\tz ");
  EXPECT_EQ(text::normalize_whitespace(once), once);
}

TEST(Text, Utf8Helpers) {
  EXPECT_TRUE(text::is_valid_utf8("网传照片"));
  EXPECT_FALSE(text::is_valid_utf8(std::string("\xC3", 1)));
  EXPECT_FALSE(text::is_valid_utf8(std::string("\xE2\x82", 2)));
  EXPECT_EQ(text::utf8_length("网传a"), 3u);
  EXPECT_EQ(text::utf8_truncate("网传照片", 2), "网传");
  EXPECT_EQ(text::utf8_truncate("abc", 10), "abc");
}

TEST(Text, Thousands) {
  EXPECT_EQ(text::thousands(12493), "12,493");
  EXPECT_EQ(text::thousands(421), "421");
  EXPECT_EQ(text::thousands(1000000), "1,000,000");
  EXPECT_EQ(text::thousands(0), "0");
}

TEST(Hash, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(base64_encode("hello"), "aGVsbG8=");
}

TEST(Image, SniffsCommonContainers) {
  EXPECT_EQ(sniff_image_format(synth::fake_png("x")), ImageFormat::Png);
  EXPECT_EQ(sniff_image_format(std::string("\xFF\xD8\xFF\xE0", 4)), ImageFormat::Jpeg);
  EXPECT_EQ(sniff_image_format("GIF89a..."), ImageFormat::Gif);
  EXPECT_EQ(sniff_image_format(std::string("RIFF\0\0\0\0WEBP", 12)), ImageFormat::Webp);
  EXPECT_FALSE(sniff_image_format("hello world"));
}

TEST(Image, UndecodableInputsThrow) {
  synth::TempDir dir;
  synth::write_file(dir.path() / "bad.png", "not an image");
  for (const auto& ref : {ImageRef::from_path(dir.path() / "bad.png"), ImageRef::from_path(dir.path() / "missing.png"),
                          ImageRef::from_bytes("")}) {
    try {
      load_image(ref);
      FAIL() << "expected UndecodableImage";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::UndecodableImage);
    }
  }
}

TEST(Types, LabelSurfaceRoundTrip) {
  for (auto l : kAllLabels) {
    EXPECT_EQ(label_from_surface(surface(l)), l);
    EXPECT_EQ(label_from_code(to_code(l)), l);
  }
  EXPECT_EQ(label_from_surface("  Non-Rumor "), StandardLabel::NonRumor);
  EXPECT_FALSE(label_from_surface("nonrumor"));
  EXPECT_EQ(to_code(StandardLabel::NonRumor), 0);
  EXPECT_EQ(to_code(StandardLabel::Rumor), 1);
  EXPECT_EQ(to_code(StandardLabel::Unverified), 2);
}

TEST(Types, ValidatePostFlagsBadInputs) {
  synth::TempDir dir;
  synth::write_file(dir.path() / "a.png", synth::fake_png("a"));
  Post ok{"p1", "text", ImageRef::from_path(dir.path() / "a.png"), StandardLabel::Rumor, LanguageHint::En};
  EXPECT_TRUE(validate_post(ok).ok());

  Post bad_text = ok;
  bad_text.text = std::string("\xFF\xFE", 2);
  EXPECT_TRUE(validate_post(bad_text).mentions("UTF-8"));

  Post missing_image = ok;
  missing_image.image = ImageRef::from_path(dir.path() / "nope.png");
  EXPECT_TRUE(validate_post(missing_image).mentions("image unresolvable"));

  EXPECT_TRUE(validate_posts({ok, ok}).mentions("duplicate id"));
}

TEST(Cache, RoundTripAndDisabled) {
  synth::TempDir dir;
  ResponseCache cache(dir.path());
  EXPECT_FALSE(cache.get("engine/x", "k1"));
  cache.put("engine/x", "k1", "payload", "q");
  EXPECT_EQ(cache.get("engine/x", "k1"), "payload");
  EXPECT_TRUE(fs::exists(cache.response_path("engine/x", "k1")));
  EXPECT_EQ(sanitize_engine_id("a b/c:d"), "a_b_c_d");

  ResponseCache disabled;
  disabled.put("e", "k", "v");
  EXPECT_FALSE(disabled.get("e", "k"));
}

TEST(Cache, ConcurrentWritersLeaveOneCompleteValue) {
  synth::TempDir dir;
  ResponseCache cache(dir.path());
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) cache.put("e", "same", std::string(1000, static_cast<char>('a' + t)));
    });
  }
  for (auto& t : threads) t.join();
  auto v = cache.get("e", "same");
  ASSERT_TRUE(v);
  ASSERT_EQ(v->size(), 1000u);
  EXPECT_EQ(std::count(v->begin(), v->end(), v->front()), 1000);
}

TEST(RequestGate, CountsAndLimits) {
  RequestGate unlimited;
  for (int i = 0; i < 5; ++i) unlimited.acquire();
  EXPECT_EQ(unlimited.requests(), 5u);

  RequestGate limited(50.0, 1.0);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 6; ++i) limited.acquire();
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_GE(elapsed, 0.09);
}

TEST(Retry, BackoffDoublesAndStopsOnNonRetryable) {
  std::vector<double> sleeps;
  Sleeper record = [&](std::chrono::duration<double> d) { sleeps.push_back(d.count()); };
  RetryPolicy policy{4, 0.5};
  int calls = 0;
  EXPECT_THROW(with_retries(policy, record, {ErrorCode::NetworkFailure},
                            [&]() -> int {
                              ++calls;
                              throw Error(ErrorCode::NetworkFailure, "down");
                            }),
               Error);
  EXPECT_EQ(calls, 4);
  EXPECT_EQ(sleeps, (std::vector<double>{0.5, 1.0, 2.0}));

  calls = 0;
  EXPECT_THROW(with_retries(policy, record, {ErrorCode::NetworkFailure},
                            [&]() -> int {
                              ++calls;
                              throw Error(ErrorCode::QuotaExceeded, "quota");
                            }),
               Error);
  EXPECT_EQ(calls, 1);

  calls = 0;
  EXPECT_EQ(with_retries(policy, record, {ErrorCode::NetworkFailure},
                         [&] {
                           if (++calls < 3) throw Error(ErrorCode::NetworkFailure, "flaky");
                           return 7;
                         }),
            7);
}

TEST(Subprocess, CapturesOutputAndTimesOut) {
  auto r = run_process({"/bin/sh", "-c", "printf out; printf err >&2; exit 3"}, std::chrono::seconds(5));
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_EQ(r.standard_output, "out");
  EXPECT_EQ(r.standard_error, "err");
  EXPECT_FALSE(r.timed_out);

  auto slow = run_process({"/bin/sh", "-c", "sleep 5"}, std::chrono::milliseconds(200));
  EXPECT_TRUE(slow.timed_out);
}

TEST(Parallel, CommitsInOrderAndStopsAtFailure) {
  std::vector<std::size_t> committed;
  ordered_parallel<std::size_t>(
      50, 6, [](std::size_t i) { return i * 2; },
      [&](std::size_t i, std::size_t& v) {
        EXPECT_EQ(v, i * 2);
        committed.push_back(i);
      });
  ASSERT_EQ(committed.size(), 50u);
  EXPECT_TRUE(std::is_sorted(committed.begin(), committed.end()));

  committed.clear();
  EXPECT_THROW(ordered_parallel<int>(
                   30, 4,
                   [](std::size_t i) {
                     if (i == 10) throw std::runtime_error("boom");
                     return 0;
                   },
                   [&](std::size_t i, int&) { committed.push_back(i); }),
               std::runtime_error);
  ASSERT_LE(committed.size(), 10u);
  for (std::size_t i = 0; i < committed.size(); ++i) EXPECT_EQ(committed[i], i);
}

TEST(Serialization, RecordsRoundTripWithStableFieldOrder) {
  InstructionRecord rec{"p1", "instr", std::string("posts/images/p1.png"), "target", Split::Test};
  const auto j = to_json(rec);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"post_id", "instruction_text", "image", "target_text", "split"}));
  EXPECT_EQ(instruction_from_json(nlohmann::json::parse(j.dump())), rec);

  RationaleRecord r{"p1", "why. Therefore, the post is labeled as <label> rumor </label>.",
                    {{"Misleading", StandardLabel::Rumor}}, StandardLabel::Rumor, "fp", "mock:m"};
  const auto rj = to_json(r);
  keys.clear();
  for (auto it = rj.begin(); it != rj.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"post_id", "output_text", "fine_grained", "terminal_label",
                                            "prompt_fingerprint", "teacher_id"}));
  EXPECT_EQ(rationale_from_json(nlohmann::json::parse(rj.dump())), r);

  synth::TempDir dir;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    auto x = synth::random_instance(rng);
    EXPECT_EQ(instance_from_json(nlohmann::json::parse(to_json(x).dump())), x);
  }
}

TEST(Serialization, MalformedJsonlReportsLine) {
  synth::TempDir dir;
  synth::write_file(dir.path() / "x.jsonl", "{\"a\":1}\n{oops\n");
  try {
    read_jsonl(dir.path() / "x.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaViolation);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  EXPECT_THROW(read_jsonl(dir.path() / "missing.jsonl"), Error);
}

TEST(Log, CaptureWarnings) {
  log::CaptureWarnings capture;
  log::warn("something degraded");
  log::info("not captured");
  EXPECT_TRUE(capture.contains("degraded"));
  EXPECT_FALSE(capture.contains("not captured"));
}

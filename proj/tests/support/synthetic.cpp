#include "synthetic.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "evidistill/hash.hpp"
#include "evidistill/serialization.hpp"

namespace evidistill::synth {
namespace fs = std::filesystem;
using nlohmann::json;

std::string fake_png(std::string_view payload) {
  return std::string("\x89PNG\r\n\x1a\n", 8) + std::string(payload);
}

TempDir::TempDir(std::string_view tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          (std::string(tag) + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

const char* kTopics[] = {"flood", "bridge collapse", "election rally", "wildfire", "vaccine trial",
                         "stadium crowd", "border clash", "protest march", "storm damage", "rescue operation"};

std::string escape_fixture(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else if (c == '\t') out += "\\t";
    else out.push_back(c);
  }
  return out;
}

}  // namespace

SyntheticWorkspace make_synthetic_workspace(const fs::path& root, std::size_t n_posts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SyntheticWorkspace ws;
  ws.root = root;
  const fs::path posts_dir = root / "posts";
  const fs::path fixtures = root / "fixtures";
  fs::create_directories(posts_dir / "evidence");
  fs::create_directories(fixtures);

  std::string ocr_table, caption_table;
  json reverse = json::object();
  json search = json::object();
  std::string posts_jsonl;

  auto add_image = [&](const fs::path& rel, const std::string& payload, const std::string& ocr,
                       const std::string& caption) {
    const auto bytes = fake_png(payload);
    write_file(posts_dir / rel, bytes);
    const auto key = sha256_hex(bytes);
    if (!ocr.empty()) ocr_table += key + "\t" + escape_fixture(ocr) + "\n";
    caption_table += key + "\t" + escape_fixture(caption) + "\n";
    return key;
  };

  for (std::size_t i = 0; i < n_posts; ++i) {
    const std::string id = "post-" + std::to_string(1000 + i).substr(1);
    const std::string topic = kTopics[(i + rng() % 3) % std::size(kTopics)];
    const auto label = static_cast<StandardLabel>(i % 3);
    const bool chinese = i % 7 == 3;
    const std::string text = chinese ? "网传" + std::to_string(i) + "号现场照片，" + topic + "发生在本市。"
                                     : "Photo " + std::to_string(i) + " shows the " + topic + " downtown today.";
    const fs::path image_rel = "images/" + id + ".png";
    const auto key = add_image(image_rel, "post image " + id, i % 4 == 0 ? "" : "BREAKING " + std::to_string(i),
                               "a photo of a " + topic + " with people nearby");

    json pages = json::array();
    for (int k = 0; k < 4; ++k) {
      pages.push_back({{"title", "Report " + std::to_string(k) + " on " + topic},
                       {"description", "Coverage " + std::to_string(k) + " of the " + topic + " for " + id + "."},
                       {"url", "https://news.example/" + id + "/" + std::to_string(k)}});
    }
    reverse[key] = pages;

    json hits = json::array();
    for (int k = 0; k < 4; ++k) {
      const fs::path ev_rel = "evidence/" + id + "-" + std::to_string(k) + ".png";
      add_image(ev_rel, "evidence " + id + " " + std::to_string(k), "caption text " + std::to_string(k),
                "an image of the " + topic + " from angle " + std::to_string(k));
      hits.push_back({{"title", "Image " + std::to_string(k) + " of " + topic},
                      {"image_url", ev_rel.generic_string()},
                      {"source_url", "https://images.example/" + id + "/" + std::to_string(k)}});
    }
    search[text] = hits;

    Post post;
    post.id = id;
    post.text = text;
    post.image = ImageRef::from_path(posts_dir / image_rel);
    post.gold_label = label;
    post.language_hint = chinese ? LanguageHint::Zh : LanguageHint::En;
    ws.posts.push_back(post);
    json line = {{"id", id},
                 {"text", text},
                 {"image", image_rel.generic_string()},
                 {"label", std::string(surface(label))},
                 {"language_hint", chinese ? "zh" : "en"}};
    posts_jsonl += line.dump() + "\n";
  }

  write_file(posts_dir / "posts.jsonl", posts_jsonl);
  write_file(fixtures / "ocr.tsv", ocr_table);
  write_file(fixtures / "caption.tsv", caption_table);
  write_file(fixtures / "reverse.json", reverse.dump(2));
  write_file(fixtures / "search.json", search.dump(2));

  auto& c = ws.config;
  c.workspace = root;
  c.visual.ocr = {BackendKind::Mock, "", "", fixtures / "ocr.tsv"};
  c.visual.caption = {BackendKind::Mock, "", "", fixtures / "caption.tsv"};
  c.retrieval.reverse_image.engine = "mock";
  c.retrieval.reverse_image.fixture = fixtures / "reverse.json";
  c.retrieval.text_search.engine = "mock";
  c.retrieval.text_search.fixture = fixtures / "search.json";
  c.retrieval.retry.base_backoff_seconds = 0.0;
  c.teacher.endpoint.kind = "mock";
  c.teacher.retry.base_backoff_seconds = 0.0;
  c.model.kind = "echo";
  return ws;
}

namespace {

std::string random_text(std::mt19937_64& rng, std::size_t max_words) {
  static const char* kWords[] = {"the",   "photo", "{label}", "## Label", "rumor",  "新闻", "照片", "claim",
                                 "<and>", "\n",    "  ",      "{",        "}",      "image", "ocr:", "Post:[",
                                 "text:", "fake",  "viral",   "evidence", "non-rumor", "é",  "\t"};
  std::string out;
  const auto n = rng() % (max_words + 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    out += kWords[rng() % std::size(kWords)];
  }
  return out;
}

}  // namespace

StandardLabel random_label(std::mt19937_64& rng) { return static_cast<StandardLabel>(rng() % 3); }

ProcessedInstance random_instance(std::mt19937_64& rng, std::size_t max_items) {
  ProcessedInstance x;
  x.post_id = "rand-" + std::to_string(rng() % 1000000);
  x.text = random_text(rng, 20);
  x.digest.ocr_text = random_text(rng, 6);
  x.digest.caption_text = random_text(rng, 8);
  if (x.digest.caption_text.empty()) x.digest.caption_text = "a picture";
  const auto m = rng() % (max_items + 1);
  const auto n = rng() % (max_items + 1);
  for (std::size_t k = 0; k < m; ++k) {
    x.textual_evidence.push_back({random_text(rng, 5), random_text(rng, 12), std::nullopt, k});
  }
  for (std::size_t k = 0; k < n; ++k) {
    x.visual_evidence.push_back({random_text(rng, 5), random_text(rng, 4), random_text(rng, 6), std::nullopt, k});
  }
  return x;
}

}  // namespace evidistill::synth

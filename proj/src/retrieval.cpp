#include "evidistill/retrieval.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "evidistill/error.hpp"
#include "evidistill/hash.hpp"
#include "evidistill/http.hpp"
#include "evidistill/image.hpp"
#include "evidistill/log.hpp"
#include "evidistill/text.hpp"

namespace evidistill {
namespace fs = std::filesystem;
using nlohmann::json;

void RetrievalConfig::validate() const {
  if (max_textual + max_visual > 20) {
    throw Error(ErrorCode::ConfigInvalid, "max_textual + max_visual must not exceed 20");
  }
  if (max_item_chars == 0) throw Error(ErrorCode::ConfigInvalid, "max_item_chars must be > 0");
  if (offline_mode && cache_dir.empty()) throw Error(ErrorCode::ConfigInvalid, "offline mode requires a cache_dir");
  retry.validate();
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json(std::string_view raw, std::string_view what) {
  auto doc = json::parse(raw, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::SchemaViolation, std::string(what) + ": malformed JSON response");
  return doc;
}

std::string str_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

std::optional<std::string> opt_field(const json& obj, const char* key) {
  auto s = str_field(obj, key);
  if (s.empty()) return std::nullopt;
  return s;
}

std::string strip_tags(std::string_view s) {
  std::string out;
  bool in_tag = false;
  for (char c : s) {
    if (c == '<') in_tag = true;
    else if (c == '>' && in_tag) in_tag = false;
    else if (!in_tag) out.push_back(c);
  }
  return out;
}

std::string api_key(const SearchEndpoint& endpoint) {
  if (endpoint.api_key_env.empty()) return {};
  const char* v = std::getenv(endpoint.api_key_env.c_str());
  return v ? std::string(v) : std::string();
}

HttpResponse send_checked(HttpRequest req) {
  HttpResponse resp;
  try {
    resp = http_send(req);
  } catch (const Error& e) {
    throw Error(ErrorCode::NetworkFailure, e.what());
  }
  if (resp.status == 429) throw Error(ErrorCode::QuotaExceeded, req.url + " returned HTTP 429");
  if (!resp.ok()) throw Error(ErrorCode::NetworkFailure, req.url + " returned HTTP " + std::to_string(resp.status));
  return resp;
}

std::string with_query(std::string url, std::string_view params) {
  url += (url.find('?') == std::string::npos ? '?' : '&');
  url += params;
  return url;
}

class JsonHttpReverseEngine final : public ReverseImageEngine {
 public:
  explicit JsonHttpReverseEngine(SearchEndpoint ep) : ep_(std::move(ep)) {}
  std::string id() const override { return "reverse-json_http-" + sha256_hex(ep_.url).substr(0, 8); }
  std::string query(std::string_view image_bytes) override {
    HttpRequest req;
    req.method = "POST";
    req.url = ep_.url;
    req.body = std::string(image_bytes);
    req.content_type = "application/octet-stream";
    req.timeout_seconds = ep_.timeout_seconds;
    if (auto key = api_key(ep_); !key.empty()) req.headers.emplace_back("Authorization", "Bearer " + key);
    return send_checked(std::move(req)).body;
  }
  std::vector<TextualEvidence> parse(std::string_view raw) const override {
    return parse_generic_reverse_response(raw);
  }

 private:
  SearchEndpoint ep_;
};

class GoogleVisionEngine final : public ReverseImageEngine {
 public:
  explicit GoogleVisionEngine(SearchEndpoint ep) : ep_(std::move(ep)) {
    if (ep_.url.empty()) ep_.url = "https://vision.googleapis.com/v1/images:annotate";
  }
  std::string id() const override { return "reverse-google_vision"; }
  std::string query(std::string_view image_bytes) override {
    json body = {{"requests",
                  json::array({{{"image", {{"content", base64_encode(image_bytes)}}},
                                {"features", json::array({{{"type", "WEB_DETECTION"}, {"maxResults", 20}}})}}})}};
    HttpRequest req;
    req.method = "POST";
    req.url = ep_.url;
    if (auto key = api_key(ep_); !key.empty()) req.url = with_query(req.url, "key=" + url_encode(key));
    req.body = body.dump();
    req.content_type = "application/json";
    req.timeout_seconds = ep_.timeout_seconds;
    return send_checked(std::move(req)).body;
  }
  std::vector<TextualEvidence> parse(std::string_view raw) const override {
    return parse_google_vision_response(raw);
  }

 private:
  SearchEndpoint ep_;
};

class JsonHttpImageEngine final : public ImageSearchEngine {
 public:
  explicit JsonHttpImageEngine(SearchEndpoint ep) : ep_(std::move(ep)) {}
  std::string id() const override { return "search-json_http-" + sha256_hex(ep_.url).substr(0, 8); }
  std::string query(std::string_view text) override {
    HttpRequest req;
    req.url = with_query(ep_.url, "q=" + url_encode(text));
    req.timeout_seconds = ep_.timeout_seconds;
    if (auto key = api_key(ep_); !key.empty()) req.headers.emplace_back("Authorization", "Bearer " + key);
    return send_checked(std::move(req)).body;
  }
  std::vector<RawImageHit> parse(std::string_view raw) const override { return parse_generic_image_response(raw); }

 private:
  SearchEndpoint ep_;
};

class GoogleCseEngine final : public ImageSearchEngine {
 public:
  explicit GoogleCseEngine(SearchEndpoint ep) : ep_(std::move(ep)) {
    if (ep_.url.empty()) ep_.url = "https://www.googleapis.com/customsearch/v1";
  }
  std::string id() const override { return "search-google_cse-" + sanitize_engine_id(ep_.cx); }
  std::string query(std::string_view text) override {
    std::string params = "searchType=image&q=" + url_encode(text);
    if (!ep_.cx.empty()) params += "&cx=" + url_encode(ep_.cx);
    if (auto key = api_key(ep_); !key.empty()) params += "&key=" + url_encode(key);
    HttpRequest req;
    req.url = with_query(ep_.url, params);
    req.timeout_seconds = ep_.timeout_seconds;
    return send_checked(std::move(req)).body;
  }
  std::vector<RawImageHit> parse(std::string_view raw) const override { return parse_google_cse_response(raw); }

 private:
  SearchEndpoint ep_;
};

json load_fixture_object(const fs::path& path) {
  auto doc = parse_json(read_file(path), path.string());
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, path.string() + ": fixture must be a JSON object");
  return doc;
}

std::string fixture_response(const json& fixtures, const std::string& key) {
  json results = json::array();
  if (auto it = fixtures.find(key); it != fixtures.end()) results = *it;
  return json{{"results", results}}.dump();
}

class FixtureReverseEngine final : public ReverseImageEngine {
 public:
  explicit FixtureReverseEngine(fs::path path) : fixtures_(load_fixture_object(path)) {}
  std::string id() const override { return "reverse-mock"; }
  std::string query(std::string_view image_bytes) override {
    return fixture_response(fixtures_, sha256_hex(image_bytes));
  }
  std::vector<TextualEvidence> parse(std::string_view raw) const override {
    return parse_generic_reverse_response(raw);
  }

 private:
  json fixtures_;
};

class FixtureImageEngine final : public ImageSearchEngine {
 public:
  explicit FixtureImageEngine(fs::path path) : fixtures_(load_fixture_object(path)) {}
  std::string id() const override { return "search-mock"; }
  std::string query(std::string_view text) override { return fixture_response(fixtures_, std::string(text)); }
  std::vector<RawImageHit> parse(std::string_view raw) const override { return parse_generic_image_response(raw); }

 private:
  json fixtures_;
};

bool is_http(std::string_view url) { return url.starts_with("http://") || url.starts_with("https://"); }

class DefaultFetcher final : public ImageFetcher {
 public:
  DefaultFetcher(fs::path base, double timeout) : base_(std::move(base)), timeout_(timeout) {}
  std::string fetch(const RawImageHit& hit) override {
    if (hit.image_bytes) return *hit.image_bytes;
    if (is_http(hit.image_url)) {
      HttpRequest req;
      req.url = hit.image_url;
      req.timeout_seconds = timeout_;
      return send_checked(std::move(req)).body;
    }
    fs::path path = hit.image_url.starts_with("file://") ? fs::path(hit.image_url.substr(7)) : fs::path(hit.image_url);
    if (path.is_relative()) path = base_ / path;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::NetworkFailure, "evidence image not found: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

 private:
  fs::path base_;
  double timeout_;
};

void cap_field(std::string& s, std::size_t cap) {
  if (text::utf8_length(s) > cap) s = text::utf8_truncate(s, cap);
}

}  // namespace

std::vector<TextualEvidence> parse_generic_reverse_response(std::string_view raw) {
  auto doc = parse_json(raw, "reverse image search");
  std::vector<TextualEvidence> out;
  const auto& results = doc.contains("results") ? doc["results"] : json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    TextualEvidence ev{text::normalize_whitespace(str_field(r, "title")),
                       text::normalize_whitespace(str_field(r, "description")), opt_field(r, "url"), i};
    if (ev.title.empty() && ev.description.empty()) continue;
    out.push_back(std::move(ev));
  }
  return out;
}

std::vector<RawImageHit> parse_generic_image_response(std::string_view raw) {
  auto doc = parse_json(raw, "image search");
  std::vector<RawImageHit> out;
  const auto& results = doc.contains("results") ? doc["results"] : json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    RawImageHit hit;
    hit.title = text::normalize_whitespace(str_field(r, "title"));
    hit.image_url = str_field(r, "image_url");
    hit.source_url = opt_field(r, "source_url");
    hit.rank = i;
    if (hit.image_url.empty()) continue;
    out.push_back(std::move(hit));
  }
  return out;
}

std::vector<TextualEvidence> parse_google_vision_response(std::string_view raw) {
  auto doc = parse_json(raw, "google vision");
  std::vector<TextualEvidence> out;
  if (!doc.contains("responses") || doc["responses"].empty()) return out;
  const auto& first = doc["responses"][0];
  if (first.contains("error")) {
    throw Error(ErrorCode::NetworkFailure, "vision API error: " + first["error"].dump());
  }
  if (!first.contains("webDetection")) return out;
  const auto& web = first["webDetection"];
  if (!web.contains("pagesWithMatchingImages")) return out;
  const auto& pages = web["pagesWithMatchingImages"];
  for (std::size_t i = 0; i < pages.size(); ++i) {
    TextualEvidence ev;
    ev.title = text::normalize_whitespace(strip_tags(str_field(pages[i], "pageTitle")));
    ev.description = text::normalize_whitespace(str_field(pages[i], "description"));
    ev.source_url = opt_field(pages[i], "url");
    ev.rank = i;
    if (ev.title.empty() && ev.description.empty()) continue;
    out.push_back(std::move(ev));
  }
  return out;
}

std::vector<RawImageHit> parse_google_cse_response(std::string_view raw) {
  auto doc = parse_json(raw, "programmable search");
  std::vector<RawImageHit> out;
  if (doc.contains("error")) throw Error(ErrorCode::NetworkFailure, "search API error: " + doc["error"].dump());
  if (!doc.contains("items")) return out;
  const auto& items = doc["items"];
  for (std::size_t i = 0; i < items.size(); ++i) {
    RawImageHit hit;
    hit.title = text::normalize_whitespace(str_field(items[i], "title"));
    hit.image_url = str_field(items[i], "link");
    if (items[i].contains("image")) hit.source_url = opt_field(items[i]["image"], "contextLink");
    hit.rank = i;
    if (hit.image_url.empty()) continue;
    out.push_back(std::move(hit));
  }
  return out;
}

std::unique_ptr<ReverseImageEngine> make_reverse_image_engine(const SearchEndpoint& endpoint) {
  if (endpoint.engine == "mock") return make_fixture_reverse_engine(endpoint.fixture);
  if (endpoint.engine == "json_http") return std::make_unique<JsonHttpReverseEngine>(endpoint);
  if (endpoint.engine == "google_vision") return std::make_unique<GoogleVisionEngine>(endpoint);
  throw Error(ErrorCode::ConfigInvalid, "unknown reverse image engine '" + endpoint.engine + "'");
}

std::unique_ptr<ImageSearchEngine> make_image_search_engine(const SearchEndpoint& endpoint) {
  if (endpoint.engine == "mock") return make_fixture_image_engine(endpoint.fixture);
  if (endpoint.engine == "json_http") return std::make_unique<JsonHttpImageEngine>(endpoint);
  if (endpoint.engine == "google_cse") return std::make_unique<GoogleCseEngine>(endpoint);
  throw Error(ErrorCode::ConfigInvalid, "unknown image search engine '" + endpoint.engine + "'");
}

std::unique_ptr<ReverseImageEngine> make_fixture_reverse_engine(fs::path fixture) {
  if (fixture.empty()) throw Error(ErrorCode::ConfigInvalid, "mock reverse image engine requires a fixture");
  return std::make_unique<FixtureReverseEngine>(std::move(fixture));
}

std::unique_ptr<ImageSearchEngine> make_fixture_image_engine(fs::path fixture) {
  if (fixture.empty()) throw Error(ErrorCode::ConfigInvalid, "mock image search engine requires a fixture");
  return std::make_unique<FixtureImageEngine>(std::move(fixture));
}

std::unique_ptr<ImageFetcher> make_default_fetcher(fs::path base_dir, double timeout_seconds) {
  return std::make_unique<DefaultFetcher>(std::move(base_dir), timeout_seconds);
}

EvidenceRetriever::EvidenceRetriever(RetrievalConfig config, std::unique_ptr<ReverseImageEngine> reverse,
                                     std::unique_ptr<ImageSearchEngine> search, std::shared_ptr<RequestGate> gate,
                                     std::shared_ptr<ResponseCache> cache, Sleeper sleeper)
    : config_(std::move(config)),
      reverse_(std::move(reverse)),
      search_(std::move(search)),
      gate_(std::move(gate)),
      cache_(std::move(cache)),
      sleeper_(std::move(sleeper)) {
  config_.validate();
  if (!cache_ && !config_.cache_dir.empty()) cache_ = std::make_shared<ResponseCache>(config_.cache_dir);
}

std::string EvidenceRetriever::fetch_cached(std::string_view engine, std::string_view key,
                                            const std::function<std::string()>& call) {
  if (cache_) {
    if (auto hit = cache_->get(engine, key)) return *hit;
  }
  if (config_.offline_mode) {
    throw Error(ErrorCode::OfflineMiss, std::string(engine) + " has no cached response for " + std::string(key));
  }
  auto raw = with_retries(config_.retry, sleeper_, {ErrorCode::NetworkFailure, ErrorCode::QuotaExceeded}, [&] {
    if (gate_) gate_->acquire();
    return call();
  });
  if (cache_) cache_->put(engine, key, raw);
  return raw;
}

std::vector<TextualEvidence> EvidenceRetriever::reverse_image_search(const ImageRef& image) {
  const std::string bytes = load_image(image);
  auto raw = fetch_cached(reverse_->id(), sha256_hex(bytes), [&] { return reverse_->query(bytes); });
  return reverse_->parse(raw);
}

std::vector<RawImageHit> EvidenceRetriever::text_search_images(std::string_view query_text) {
  const std::string q = text::normalize_whitespace(query_text);
  if (q.empty()) throw Error(ErrorCode::EmptyQuery, "text search needs a nonempty query");
  auto raw = fetch_cached(search_->id(), sha256_hex(q), [&] { return search_->query(q); });
  return search_->parse(raw);
}

std::optional<VisualEvidence> EvidenceRetriever::digest_visual_evidence(const RawImageHit& hit,
                                                                        VisualProcessor& visual,
                                                                        ImageFetcher& fetcher) {
  try {
    std::string bytes;
    if (!hit.image_bytes && is_http(hit.image_url)) {
      bytes = fetch_cached("evidence-image", sha256_hex(hit.image_url), [&] { return fetcher.fetch(hit); });
    } else {
      bytes = fetcher.fetch(hit);
    }
    auto digest = visual.process_visual(ImageRef::from_bytes(std::move(bytes)));
    return VisualEvidence{hit.title, std::move(digest.ocr_text), std::move(digest.caption_text), hit.source_url,
                          hit.rank};
  } catch (const Error& e) {
    log::warn("dropping visual evidence '" + hit.title + "' (rank " + std::to_string(hit.rank) + "): " + e.what());
    return std::nullopt;
  }
}

EvidenceBundle EvidenceRetriever::retrieve(const Post& post, VisualProcessor& visual, ImageFetcher& fetcher) {
  EvidenceBundle bundle;
  bundle.textual = reverse_image_search(post.image);
  std::vector<RawImageHit> hits;
  try {
    hits = text_search_images(post.text);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyQuery) throw;
  }
  for (const auto& hit : hits) {
    if (auto ev = digest_visual_evidence(hit, visual, fetcher)) bundle.visual.push_back(std::move(*ev));
  }
  return bundle;
}

EvidenceBundle select_evidence(std::vector<TextualEvidence> textual, std::vector<VisualEvidence> visual,
                               std::size_t max_textual, std::size_t max_visual, std::size_t max_item_chars) {
  auto by_rank = [](const auto& a, const auto& b) { return a.rank < b.rank; };
  std::stable_sort(textual.begin(), textual.end(), by_rank);
  std::stable_sort(visual.begin(), visual.end(), by_rank);

  EvidenceBundle out;
  std::set<std::pair<std::string, std::string>> seen_textual;
  for (auto& ev : textual) {
    if (out.textual.size() == max_textual) break;
    cap_field(ev.title, max_item_chars);
    cap_field(ev.description, max_item_chars);
    if (!seen_textual.emplace(ev.title, ev.description).second) continue;
    out.textual.push_back(std::move(ev));
  }
  std::set<std::tuple<std::string, std::string, std::string>> seen_visual;
  for (auto& ev : visual) {
    if (out.visual.size() == max_visual) break;
    cap_field(ev.image_title, max_item_chars);
    cap_field(ev.image_ocr, max_item_chars);
    cap_field(ev.image_caption, max_item_chars);
    if (!seen_visual.emplace(ev.image_title, ev.image_ocr, ev.image_caption).second) continue;
    out.visual.push_back(std::move(ev));
  }
  return out;
}

EvidenceBundle select_evidence(std::vector<TextualEvidence> textual, std::vector<VisualEvidence> visual,
                               const RetrievalConfig& config) {
  return select_evidence(std::move(textual), std::move(visual), config.max_textual, config.max_visual,
                         config.max_item_chars);
}

ProcessedInstance with_selected_evidence(const ProcessedInstance& instance, std::size_t max_textual,
                                         std::size_t max_visual, std::size_t max_item_chars) {
  auto bundle = select_evidence(instance.textual_evidence, instance.visual_evidence, max_textual, max_visual,
                                max_item_chars);
  ProcessedInstance out = instance;
  out.textual_evidence = std::move(bundle.textual);
  out.visual_evidence = std::move(bundle.visual);
  return out;
}

}  // namespace evidistill

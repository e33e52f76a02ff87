#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evidistill/cache.hpp"
#include "evidistill/request_gate.hpp"
#include "evidistill/retry.hpp"
#include "evidistill/types.hpp"
#include "evidistill/visual.hpp"

namespace evidistill {

// Adapter selection and endpoint settings for one search direction.
struct SearchEndpoint {
  // "mock" (fixture replay), "json_http", "google_vision", "google_cse"
  std::string engine = "mock";
  std::string url;
  // Name of the environment variable holding the API key.
  std::string api_key_env;
  // Programmable search engine id (google_cse).
  std::string cx;
  std::filesystem::path fixture;
  double timeout_seconds = 30.0;
};

struct RetrievalConfig {
  std::size_t max_textual = 3;
  std::size_t max_visual = 3;
  // Per-field code-point cap applied when evidence is selected.
  std::size_t max_item_chars = 500;
  SearchEndpoint reverse_image;
  SearchEndpoint text_search;
  std::filesystem::path cache_dir;
  RetryPolicy retry;
  bool offline_mode = false;

  // Throws ConfigInvalid (m + n must stay within 20, offline needs a cache).
  void validate() const;
};

// An image returned by text search, before digesting.
struct RawImageHit {
  std::string title;
  std::string image_url;
  // Set when the engine returned the image inline.
  std::optional<std::string> image_bytes;
  std::optional<std::string> source_url;
  std::size_t rank = 0;
};

// Image -> pages (titles + descriptions).
class ReverseImageEngine {
 public:
  virtual ~ReverseImageEngine() = default;
  virtual std::string id() const = 0;
  // Raw response bytes. Throws NetworkFailure, QuotaExceeded or Timeout.
  virtual std::string query(std::string_view image_bytes) = 0;
  virtual std::vector<TextualEvidence> parse(std::string_view raw) const = 0;
};

// Text -> images.
class ImageSearchEngine {
 public:
  virtual ~ImageSearchEngine() = default;
  virtual std::string id() const = 0;
  virtual std::string query(std::string_view text) = 0;
  virtual std::vector<RawImageHit> parse(std::string_view raw) const = 0;
};

// Generic JSON schemas used by the json_http adapters and by fixtures:
//   reverse image: {"results": [{"title", "description", "url"}]}
//   image search:  {"results": [{"title", "image_url", "source_url"}]}
std::vector<TextualEvidence> parse_generic_reverse_response(std::string_view raw);
std::vector<RawImageHit> parse_generic_image_response(std::string_view raw);
// Google Cloud Vision WEB_DETECTION response.
std::vector<TextualEvidence> parse_google_vision_response(std::string_view raw);
// Google Programmable Search (searchType=image) response.
std::vector<RawImageHit> parse_google_cse_response(std::string_view raw);

std::unique_ptr<ReverseImageEngine> make_reverse_image_engine(const SearchEndpoint& endpoint);
std::unique_ptr<ImageSearchEngine> make_image_search_engine(const SearchEndpoint& endpoint);

// Fixture-backed engines. Reverse-image fixtures are keyed by image sha256,
// image-search fixtures by the exact query text; both hold a JSON object
// mapping key -> results array in the generic schema. Unknown keys yield an
// empty result list.
std::unique_ptr<ReverseImageEngine> make_fixture_reverse_engine(std::filesystem::path fixture);
std::unique_ptr<ImageSearchEngine> make_fixture_image_engine(std::filesystem::path fixture);

// Fetches evidence image bytes: inline bytes, http(s) URLs, file:// URLs or
// paths relative to a base directory. Throws NetworkFailure on failure.
class ImageFetcher {
 public:
  virtual ~ImageFetcher() = default;
  virtual std::string fetch(const RawImageHit& hit) = 0;
};

std::unique_ptr<ImageFetcher> make_default_fetcher(std::filesystem::path base_dir, double timeout_seconds = 30.0);

struct EvidenceBundle {
  std::vector<TextualEvidence> textual;
  std::vector<VisualEvidence> visual;

  friend bool operator==(const EvidenceBundle&, const EvidenceBundle&) = default;
};

// Both search directions plus digesting, with caching, retries, offline
// replay and the shared request gate.
class EvidenceRetriever {
 public:
  EvidenceRetriever(RetrievalConfig config, std::unique_ptr<ReverseImageEngine> reverse,
                    std::unique_ptr<ImageSearchEngine> search, std::shared_ptr<RequestGate> gate,
                    std::shared_ptr<ResponseCache> cache, Sleeper sleeper = real_sleeper());

  const RetrievalConfig& config() const { return config_; }

  // Engine rank order; unbounded length. Throws QuotaExceeded,
  // NetworkFailure (after retries) or OfflineMiss.
  std::vector<TextualEvidence> reverse_image_search(const ImageRef& image);

  // Throws EmptyQuery for blank text, otherwise as above.
  std::vector<RawImageHit> text_search_images(std::string_view text);

  // nullopt (plus a warning) when the hit cannot be fetched or digested.
  std::optional<VisualEvidence> digest_visual_evidence(const RawImageHit& hit, VisualProcessor& visual,
                                                       ImageFetcher& fetcher);

  // Runs both directions and digests every image hit. Lists are rank
  // ordered and not capped.
  EvidenceBundle retrieve(const Post& post, VisualProcessor& visual, ImageFetcher& fetcher);

 private:
  std::string fetch_cached(std::string_view engine, std::string_view key, const std::function<std::string()>& call);

  RetrievalConfig config_;
  std::unique_ptr<ReverseImageEngine> reverse_;
  std::unique_ptr<ImageSearchEngine> search_;
  std::shared_ptr<RequestGate> gate_;
  std::shared_ptr<ResponseCache> cache_;
  Sleeper sleeper_;
};

// Caps every text field at max_item_chars code points, removes exact
// duplicates (keeping the lowest rank), then keeps the first max_textual /
// max_visual items. Idempotent.
EvidenceBundle select_evidence(std::vector<TextualEvidence> textual, std::vector<VisualEvidence> visual,
                               const RetrievalConfig& config);

EvidenceBundle select_evidence(std::vector<TextualEvidence> textual, std::vector<VisualEvidence> visual,
                               std::size_t max_textual, std::size_t max_visual, std::size_t max_item_chars = 500);

// Instance with its evidence replaced by select_evidence's output.
ProcessedInstance with_selected_evidence(const ProcessedInstance& instance, std::size_t max_textual,
                                         std::size_t max_visual, std::size_t max_item_chars = 500);

}  // namespace evidistill

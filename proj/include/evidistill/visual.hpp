#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "evidistill/cache.hpp"
#include "evidistill/request_gate.hpp"
#include "evidistill/types.hpp"

namespace evidistill {

enum class BackendKind { ExternalCommand, HttpService, Mock };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> backend_kind_from_string(std::string_view s);

struct BackendSettings {
  BackendKind kind = BackendKind::Mock;
  // ExternalCommand: shell command; the image path is passed as "$1".
  std::string command;
  // HttpService: endpoint receiving the raw image bytes via POST.
  std::string url;
  // Mock: two-column table, image sha256 -> text.
  std::filesystem::path fixture;
};

struct VisualBackendConfig {
  BackendSettings ocr;
  BackendSettings caption;
  double timeout_seconds = 60.0;

  // Throws ConfigInvalid.
  void validate() const;
};

// "<key>\t<text>" rows; text may use \n, \t and \\ escapes. Keys are image
// sha256 hashes for the vision backends.
class FixtureTable {
 public:
  static FixtureTable parse(std::string_view tsv);
  static FixtureTable load(const std::filesystem::path& path);

  void add(std::string key, std::string value) { rows_[std::move(key)] = std::move(value); }
  std::optional<std::string> find(std::string_view key) const;
  std::string serialize() const;

 private:
  std::map<std::string, std::string, std::less<>> rows_;
};

// One OCR or captioning engine. Returns raw text; throws BackendUnavailable
// or Timeout.
class TextBackend {
 public:
  virtual ~TextBackend() = default;
  // Stable identity used in cache keys.
  virtual std::string id() const = 0;
  virtual std::string run(const ImageRef& image, std::string_view image_bytes) = 0;
};

std::unique_ptr<TextBackend> make_text_backend(const BackendSettings& settings, double timeout_seconds);
std::unique_ptr<TextBackend> make_mock_backend(FixtureTable fixtures);

// OCR + captioning with response caching keyed by (backend identity, image
// hash). OCR is best-effort; the caption is mandatory.
class VisualProcessor {
 public:
  VisualProcessor(const VisualBackendConfig& config, std::shared_ptr<RequestGate> gate,
                  std::shared_ptr<ResponseCache> cache = nullptr);
  VisualProcessor(std::unique_ptr<TextBackend> ocr, std::unique_ptr<TextBackend> caption,
                  std::shared_ptr<RequestGate> gate, std::shared_ptr<ResponseCache> cache = nullptr);

  // Whitespace-normalized; "" when the image has no text.
  std::string run_ocr(const ImageRef& image);
  // Whitespace-normalized and nonempty; throws EmptyCaption otherwise.
  std::string generate_caption(const ImageRef& image);
  // OCR failures degrade to "" with a warning; caption errors propagate.
  VisualDigest process_visual(const ImageRef& image);

 private:
  std::string query(TextBackend& backend, std::string_view role, const ImageRef& image, std::string_view bytes);

  std::unique_ptr<TextBackend> ocr_;
  std::unique_ptr<TextBackend> caption_;
  std::shared_ptr<RequestGate> gate_;
  std::shared_ptr<ResponseCache> cache_;
};

std::string run_ocr(const ImageRef& image, const VisualBackendConfig& config);
std::string generate_caption(const ImageRef& image, const VisualBackendConfig& config);
VisualDigest process_visual(const ImageRef& image, const VisualBackendConfig& config);

}  // namespace evidistill

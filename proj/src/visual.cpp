#include "evidistill/visual.hpp"

#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "evidistill/error.hpp"
#include "evidistill/hash.hpp"
#include "evidistill/http.hpp"
#include "evidistill/image.hpp"
#include "evidistill/log.hpp"
#include "evidistill/subprocess.hpp"
#include "evidistill/text.hpp"

namespace evidistill {
namespace fs = std::filesystem;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::ExternalCommand: return "external_command";
    case BackendKind::HttpService: return "http_service";
    case BackendKind::Mock: return "mock";
  }
  return "mock";
}

std::optional<BackendKind> backend_kind_from_string(std::string_view s) {
  if (s == "external_command" || s == "command") return BackendKind::ExternalCommand;
  if (s == "http_service" || s == "http") return BackendKind::HttpService;
  if (s == "mock") return BackendKind::Mock;
  return std::nullopt;
}

namespace {

void validate_backend(const BackendSettings& s, std::string_view role) {
  const std::string r(role);
  switch (s.kind) {
    case BackendKind::ExternalCommand:
      if (text::trim(s.command).empty()) throw Error(ErrorCode::ConfigInvalid, r + " backend: command is empty");
      break;
    case BackendKind::HttpService:
      if (s.url.empty()) throw Error(ErrorCode::ConfigInvalid, r + " backend: url is empty");
      break;
    case BackendKind::Mock:
      if (s.fixture.empty()) throw Error(ErrorCode::ConfigInvalid, r + " backend: mock requires a fixture table");
      break;
  }
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[++i];
      out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else if (c == '\t') out += "\\t";
    else out.push_back(c);
  }
  return out;
}

class MockBackend final : public TextBackend {
 public:
  explicit MockBackend(FixtureTable fixtures) : fixtures_(std::move(fixtures)) {}
  std::string id() const override { return "mock"; }
  std::string run(const ImageRef&, std::string_view bytes) override {
    return fixtures_.find(sha256_hex(bytes)).value_or("");
  }

 private:
  FixtureTable fixtures_;
};

// Writes inline images to a private temp file for the duration of a call.
class TempImageFile {
 public:
  explicit TempImageFile(std::string_view bytes) {
    auto dir = fs::temp_directory_path();
    path_ = dir / ("evidistill-img-" + std::to_string(::getpid()) + "-" + sha256_hex(bytes).substr(0, 16) + "-" +
                   std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::ofstream out(path_, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  ~TempImageFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  TempImageFile(const TempImageFile&) = delete;
  TempImageFile& operator=(const TempImageFile&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

class CommandBackend final : public TextBackend {
 public:
  CommandBackend(std::string command, double timeout) : command_(std::move(command)), timeout_(timeout) {}
  std::string id() const override { return "cmd-" + sha256_hex(command_).substr(0, 12); }
  std::string run(const ImageRef& image, std::string_view bytes) override {
    std::optional<TempImageFile> temp;
    fs::path path = image.path;
    if (image.is_inline()) {
      temp.emplace(bytes);
      path = temp->path();
    }
    ProcessResult result;
    try {
      result = run_process({"/bin/sh", "-c", command_ + " \"$1\"", "sh", path.string()},
                           std::chrono::duration<double>(timeout_));
    } catch (const std::system_error& e) {
      throw Error(ErrorCode::BackendUnavailable, command_ + ": " + e.what());
    }
    if (result.timed_out) throw Error(ErrorCode::Timeout, command_ + " timed out");
    if (result.exit_code != 0) {
      throw Error(ErrorCode::BackendUnavailable,
                  command_ + " exited with " + std::to_string(result.exit_code) + ": " +
                      text::trim(result.standard_error));
    }
    return result.standard_output;
  }

 private:
  std::string command_;
  double timeout_;
};

class HttpBackend final : public TextBackend {
 public:
  HttpBackend(std::string url, double timeout) : url_(std::move(url)), timeout_(timeout) {}
  std::string id() const override { return "http-" + sha256_hex(url_).substr(0, 12); }
  std::string run(const ImageRef&, std::string_view bytes) override {
    HttpRequest req;
    req.method = "POST";
    req.url = url_;
    req.body = std::string(bytes);
    req.content_type = "application/octet-stream";
    req.timeout_seconds = timeout_;
    HttpResponse resp;
    try {
      resp = http_send(req);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Timeout) throw;
      throw Error(ErrorCode::BackendUnavailable, e.what());
    }
    if (!resp.ok()) throw Error(ErrorCode::BackendUnavailable, url_ + " returned HTTP " + std::to_string(resp.status));
    return resp.body;
  }

 private:
  std::string url_;
  double timeout_;
};

}  // namespace

void VisualBackendConfig::validate() const {
  if (!(timeout_seconds > 0)) throw Error(ErrorCode::ConfigInvalid, "visual timeout must be > 0");
  validate_backend(ocr, "ocr");
  validate_backend(caption, "caption");
}

FixtureTable FixtureTable::parse(std::string_view tsv) {
  FixtureTable table;
  for (const auto& raw : text::split(tsv, '\n')) {
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::SchemaViolation, "fixture row without tab: " + line);
    table.add(line.substr(0, tab), unescape(std::string_view(line).substr(tab + 1)));
  }
  return table;
}

FixtureTable FixtureTable::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open fixture table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<std::string> FixtureTable::find(std::string_view key) const {
  auto it = rows_.find(key);
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

std::string FixtureTable::serialize() const {
  std::string out;
  for (const auto& [k, v] : rows_) out += k + '\t' + escape(v) + '\n';
  return out;
}

std::unique_ptr<TextBackend> make_mock_backend(FixtureTable fixtures) {
  return std::make_unique<MockBackend>(std::move(fixtures));
}

std::unique_ptr<TextBackend> make_text_backend(const BackendSettings& settings, double timeout_seconds) {
  switch (settings.kind) {
    case BackendKind::ExternalCommand: return std::make_unique<CommandBackend>(settings.command, timeout_seconds);
    case BackendKind::HttpService: return std::make_unique<HttpBackend>(settings.url, timeout_seconds);
    case BackendKind::Mock: return make_mock_backend(FixtureTable::load(settings.fixture));
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown backend kind");
}

VisualProcessor::VisualProcessor(const VisualBackendConfig& config, std::shared_ptr<RequestGate> gate,
                                 std::shared_ptr<ResponseCache> cache)
    : gate_(std::move(gate)), cache_(std::move(cache)) {
  config.validate();
  ocr_ = make_text_backend(config.ocr, config.timeout_seconds);
  caption_ = make_text_backend(config.caption, config.timeout_seconds);
}

VisualProcessor::VisualProcessor(std::unique_ptr<TextBackend> ocr, std::unique_ptr<TextBackend> caption,
                                 std::shared_ptr<RequestGate> gate, std::shared_ptr<ResponseCache> cache)
    : ocr_(std::move(ocr)), caption_(std::move(caption)), gate_(std::move(gate)), cache_(std::move(cache)) {}

std::string VisualProcessor::query(TextBackend& backend, std::string_view role, const ImageRef& image,
                                   std::string_view bytes) {
  const std::string engine = std::string(role) + "-" + backend.id();
  const std::string key = sha256_hex(bytes);
  if (cache_) {
    if (auto hit = cache_->get(engine, key)) return *hit;
  }
  if (gate_) gate_->acquire();
  std::string raw = backend.run(image, bytes);
  if (cache_) cache_->put(engine, key, raw);
  return raw;
}

std::string VisualProcessor::run_ocr(const ImageRef& image) {
  const std::string bytes = load_image(image);
  return text::normalize_whitespace(query(*ocr_, "ocr", image, bytes));
}

std::string VisualProcessor::generate_caption(const ImageRef& image) {
  const std::string bytes = load_image(image);
  auto caption = text::normalize_whitespace(query(*caption_, "caption", image, bytes));
  if (caption.empty()) throw Error(ErrorCode::EmptyCaption, "caption backend returned blank text");
  return caption;
}

VisualDigest VisualProcessor::process_visual(const ImageRef& image) {
  VisualDigest digest;
  digest.caption_text = generate_caption(image);
  try {
    digest.ocr_text = run_ocr(image);
  } catch (const Error& e) {
    log::warn(std::string("OCR failed, continuing without text: ") + e.what());
    digest.ocr_text.clear();
  }
  return digest;
}

std::string run_ocr(const ImageRef& image, const VisualBackendConfig& config) {
  return VisualProcessor(config, nullptr).run_ocr(image);
}

std::string generate_caption(const ImageRef& image, const VisualBackendConfig& config) {
  return VisualProcessor(config, nullptr).generate_caption(image);
}

VisualDigest process_visual(const ImageRef& image, const VisualBackendConfig& config) {
  return VisualProcessor(config, nullptr).process_visual(image);
}

}  // namespace evidistill

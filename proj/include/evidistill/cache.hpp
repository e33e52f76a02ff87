#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace evidistill {

// Raw-response store shared by the vision backends, search engines and the
// teacher client. Layout: <root>/<engine>/<key>.response plus a
// <key>.meta.json sidecar. Writes go through a temp file and a rename, and
// are serialized per key within the process. A default-constructed cache is
// disabled: get() misses and put() does nothing.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path root);

  bool enabled() const { return !root_.empty(); }
  const std::filesystem::path& root() const { return root_; }

  std::optional<std::string> get(std::string_view engine, std::string_view key) const;
  void put(std::string_view engine, std::string_view key, std::string_view bytes, std::string_view query_hash = {});

  std::filesystem::path response_path(std::string_view engine, std::string_view key) const;

 private:
  std::mutex& lock_for(std::string_view engine, std::string_view key) const;

  std::filesystem::path root_;
  mutable std::array<std::mutex, 64> locks_;
};

// Engine ids become directory names; anything outside [A-Za-z0-9._-] maps
// to '_'.
std::string sanitize_engine_id(std::string_view id);

}  // namespace evidistill

#include "evidistill/cache.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "evidistill/error.hpp"
#include "json.hpp"

namespace evidistill {
namespace fs = std::filesystem;

std::string sanitize_engine_id(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? std::string("_") : out;
}

ResponseCache::ResponseCache(fs::path root) : root_(std::move(root)) {}

fs::path ResponseCache::response_path(std::string_view engine, std::string_view key) const {
  return root_ / sanitize_engine_id(engine) / (std::string(key) + ".response");
}

std::mutex& ResponseCache::lock_for(std::string_view engine, std::string_view key) const {
  auto h = std::hash<std::string>{}(std::string(engine) + '/' + std::string(key));
  return locks_[h % locks_.size()];
}

std::optional<std::string> ResponseCache::get(std::string_view engine, std::string_view key) const {
  if (!enabled()) return std::nullopt;
  std::lock_guard lock(lock_for(engine, key));
  std::ifstream in(response_path(engine, key), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

void write_atomically(const fs::path& target, std::string_view bytes) {
  static std::atomic<unsigned> counter{0};
  auto tmp = target;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
         std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace

void ResponseCache::put(std::string_view engine, std::string_view key, std::string_view bytes,
                        std::string_view query_hash) {
  if (!enabled()) return;
  std::lock_guard lock(lock_for(engine, key));
  auto path = response_path(engine, key);
  fs::create_directories(path.parent_path());
  write_atomically(path, bytes);

  nlohmann::ordered_json meta;
  meta["engine"] = std::string(engine);
  meta["key"] = std::string(key);
  meta["query_hash"] = std::string(query_hash.empty() ? key : query_hash);
  meta["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
  auto meta_path = path;
  meta_path.replace_extension(".meta.json");
  write_atomically(meta_path, meta.dump(2) + "\n");
}

}  // namespace evidistill

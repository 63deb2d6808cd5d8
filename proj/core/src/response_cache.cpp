#include <fstream>

#include <spdlog/spdlog.h>

#include "probe/digest.hpp"
#include "probe/error.hpp"
#include "probe/gateway.hpp"
#include "probe/io.hpp"

namespace probe {

namespace {

nlohmann::json to_json(const CachedResponse& r) {
  return {{"cache_key", r.cache_key}, {"raw_text", r.raw_text}, {"latency_ms", r.latency_ms}, {"created", r.created}};
}

}  // namespace

std::string chat_cache_key(const ModelConfig& config, const std::vector<ChatMessage>& messages, int attempt) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json key = {
      {"model", config.model_id},
      {"messages", msgs},
      {"temperature", config.temperature ? nlohmann::json(*config.temperature) : nlohmann::json()},
      {"top_p", config.top_p ? nlohmann::json(*config.top_p) : nlohmann::json()},
      {"max_tokens", config.max_tokens},
      {"seed", config.seed ? nlohmann::json(*config.seed) : nlohmann::json()},
      {"attempt", attempt},
  };
  return digest_json(key);
}

ResponseCache::ResponseCache(std::filesystem::path file, std::size_t flush_every)
    : file_(std::move(file)), flush_every_(flush_every == 0 ? 1 : flush_every) {
  std::ifstream in(file_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      CachedResponse r{j.at("cache_key").get<std::string>(), j.at("raw_text").get<std::string>(),
                       j.value("latency_ms", 0.0), j.value("created", std::string())};
      if (index_.emplace(r.cache_key, entries_.size()).second) entries_.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(file_.string() + ":" + std::to_string(lineno) + ": bad cache entry: " + e.what(), lineno,
                        "cache_key");
    }
  }
}

ResponseCache::~ResponseCache() {
  try {
    flush();
  } catch (const std::exception& e) {
    spdlog::error("failed to flush response cache {}: {}", file_.string(), e.what());
  }
}

std::optional<CachedResponse> ResponseCache::lookup(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second];
}

void ResponseCache::insert(CachedResponse r) {
  std::lock_guard lock(mu_);
  if (!index_.emplace(r.cache_key, entries_.size()).second) return;
  entries_.push_back(std::move(r));
  if (++dirty_ >= flush_every_) flush_locked();
}

void ResponseCache::flush() {
  std::lock_guard lock(mu_);
  flush_locked();
}

void ResponseCache::flush_locked() {
  if (dirty_ == 0) return;
  std::string out;
  for (const auto& e : entries_) out += to_json(e).dump() + "\n";
  write_file_atomic(file_, out);
  dirty_ = 0;
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

}  // namespace probe

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/prompt.hpp"

namespace probe {

/// Sampling and transport settings for one annotator model. Unset
/// temperature/top-p mean "server default" and are omitted on the wire.
struct ModelConfig {
  std::string model_id;
  std::string endpoint;  // full URL, e.g. http://127.0.0.1:11434/api/chat
  std::optional<double> temperature;
  std::optional<double> top_p;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
  std::chrono::milliseconds request_timeout{120'000};
  int max_retries = 3;

  /// Throws ValidationError when a field is out of range.
  void validate() const;
  /// Effective settings as recorded in run manifests.
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct ChatMessage {
  std::string role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

/// System message (if any) followed by the user message.
std::vector<ChatMessage> to_messages(const RenderedPrompt& prompt);

struct CachedResponse {
  std::string cache_key;
  std::string raw_text;
  double latency_ms = 0;
  std::string created;
};

/// Digest over model id, every message byte, sampling params, seed and attempt.
std::string chat_cache_key(const ModelConfig& config, const std::vector<ChatMessage>& messages, int attempt);

/// Append-mostly JSONL store keyed by cache_key. Writes go to a temp file
/// that is renamed over the target, every `flush_every` inserts and on
/// flush()/destruction. Thread-safe.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path file, std::size_t flush_every = 64);
  ~ResponseCache();
  ResponseCache(const ResponseCache&) = delete;
  ResponseCache& operator=(const ResponseCache&) = delete;

  std::optional<CachedResponse> lookup(const std::string& key) const;
  /// First insert for a key wins; later inserts with the same key are ignored.
  void insert(CachedResponse r);
  void flush();
  std::size_t size() const;
  const std::filesystem::path& path() const { return file_; }

 private:
  void flush_locked();

  std::filesystem::path file_;
  std::size_t flush_every_;
  mutable std::mutex mu_;
  std::vector<CachedResponse> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dirty_ = 0;
};

struct ChatResult {
  std::string text;
  double latency_ms = 0;
  bool from_cache = false;
};

/// Outcome of one conversation in a settled batch: exactly one of result/error.
struct BatchOutcome {
  std::optional<ChatResult> result;
  std::exception_ptr error;
};

struct GatewayOptions {
  /// Directory holding <model-id>.jsonl; empty disables persistence.
  std::filesystem::path cache_dir;
  std::size_t concurrency = 4;
  std::chrono::milliseconds backoff_base{250};
  /// Called with the number of requests in flight each time one starts.
  std::function<void(std::size_t)> in_flight_probe;
};

/// Client for a chat-completions style model server.
///
/// Wire format: POST {model, messages:[{role,content}], stream:false,
/// options:{temperature, top_p, seed, num_predict}} -> {message:{content}}.
class ChatGateway {
 public:
  ChatGateway(ModelConfig config, GatewayOptions options = {});
  ~ChatGateway();

  ChatResult chat(const std::vector<ChatMessage>& messages, int attempt = 0);
  std::string chat(const RenderedPrompt& prompt, int attempt = 0) { return chat(to_messages(prompt), attempt).text; }

  /// Runs every conversation with at most `options.concurrency` requests in
  /// flight. Result i belongs to input i. The first failure is rethrown
  /// after all workers stop.
  std::vector<ChatResult> chat_batch(const std::vector<std::vector<ChatMessage>>& conversations, int attempt = 0);
  /// As chat_batch, but failures are reported per item instead of thrown.
  std::vector<BatchOutcome> chat_batch_settled(const std::vector<std::vector<ChatMessage>>& conversations,
                                               int attempt = 0);

  const ModelConfig& config() const { return config_; }
  std::size_t network_calls() const { return network_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  void flush_cache();

 private:
  std::string request(const std::vector<ChatMessage>& messages);

  struct Impl;
  ModelConfig config_;
  GatewayOptions options_;
  std::unique_ptr<ResponseCache> cache_;
  std::unique_ptr<Impl> impl_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_tag;
};

enum class SentimentLabel { Negative, Neutral, Positive };

std::string_view to_string(SentimentLabel l);

struct SentimentResult {
  SentimentLabel label = SentimentLabel::Neutral;
  double confidence = 0;
  /// Negative -> -1, Neutral -> 0, Positive -> +1.
  int sign() const { return label == SentimentLabel::Negative ? -1 : label == SentimentLabel::Positive ? 1 : 0; }
};

struct ScorerHealth {
  std::string status;
  std::size_t dim = 0;
  nlohmann::json model_tags;
};

struct ScorerOptions {
  std::chrono::milliseconds timeout{60'000};
  std::size_t batch_size = 64;
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{250};
  double norm_tolerance = 1e-6;
};

/// Client for the embedding/sentiment sidecar (/embed, /sentiment, /health).
class ScorerClient {
 public:
  explicit ScorerClient(std::string base_url, ScorerOptions options = {});
  ~ScorerClient();

  ScorerHealth health();
  /// One unit-norm vector per input, in order. Inputs are sent in batches.
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);
  std::vector<SentimentResult> sentiment(const std::vector<std::string>& texts);

  const std::string& base_url() const { return base_url_; }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  std::size_t declared_dim();

  struct Impl;
  std::string base_url_;
  ScorerOptions options_;
  std::unique_ptr<Impl> impl_;
  std::optional<std::size_t> dim_;
};

}  // namespace probe

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

// In-process HTTP stand-ins for a chat model server and the scorer sidecar.
// Both bind 127.0.0.1 on an ephemeral port and serve until destroyed.
namespace probe::stub {

struct ChatReply {
  int status = 200;
  std::string content;
};

/// Maps a request body ({model, messages, options, ...}) to a reply.
using ChatScript = std::function<ChatReply(const nlohmann::json& request)>;

/// Text of the last message in a chat request.
std::string last_user_message(const nlohmann::json& request);

/// The value after "Target sentence: " in a rendered corpus prompt, or "".
std::string target_sentence(std::string_view prompt);

/// Deterministic replies for every prompt the harness sends: persona
/// rewrites, classification labels and qualitative analysis documents
/// (with structured blocks when the prompt asks for them).
ChatReply scripted_reply(const nlohmann::json& request);

class ChatStub {
 public:
  explicit ChatStub(ChatScript script = scripted_reply);
  ~ChatStub();
  ChatStub(const ChatStub&) = delete;
  ChatStub& operator=(const ChatStub&) = delete;

  int port() const { return port_; }
  /// Full chat URL, http://127.0.0.1:<port>/api/chat.
  std::string endpoint() const;

  std::size_t requests() const { return requests_.load(); }
  std::size_t max_in_flight() const { return max_in_flight_.load(); }
  /// Every request body received, in arrival order.
  std::vector<nlohmann::json> received() const;
  /// Sleep applied before each reply; lets tests observe concurrency.
  void set_delay(std::chrono::milliseconds d) { delay_ms_ = d.count(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
  std::atomic<long> delay_ms_{0};
};

/// Unit vector from signed feature hashing of the text's tokens. Texts with
/// no tokens map to the first basis vector.
std::vector<double> hashed_embedding(std::string_view text, std::size_t dim);

struct LexiconSentiment {
  std::string label;  // "Positive" | "Neutral" | "Negative"
  double confidence = 0;
};

/// Counts a small positive/negative word list.
LexiconSentiment lexicon_sentiment(std::string_view text);

class ScorerStub {
 public:
  explicit ScorerStub(std::size_t dim = 64);
  ~ScorerStub();
  ScorerStub(const ScorerStub&) = delete;
  ScorerStub& operator=(const ScorerStub&) = delete;

  int port() const { return port_; }
  std::string base_url() const;
  std::size_t dim() const { return dim_; }
  std::size_t requests() const { return requests_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t dim_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace probe::stub

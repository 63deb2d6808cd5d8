#include <semaphore>
#include <thread>

#include <spdlog/spdlog.h>

#include "http.hpp"
#include "probe/error.hpp"
#include "probe/gateway.hpp"
#include "probe/io.hpp"

namespace probe {

void ModelConfig::validate() const {
  if (model_id.empty()) throw ValidationError("model config: empty model id");
  if (endpoint.empty()) throw ValidationError("model config '" + model_id + "': empty endpoint");
  if (temperature && !(*temperature >= 0)) throw ValidationError("model config '" + model_id + "': temperature < 0");
  if (top_p && !(*top_p > 0 && *top_p <= 1)) {
    throw ValidationError("model config '" + model_id + "': top_p outside (0, 1]");
  }
  if (max_tokens <= 0) throw ValidationError("model config '" + model_id + "': max_tokens must be positive");
  if (max_retries < 0 || max_retries > 10) {
    throw ValidationError("model config '" + model_id + "': max_retries outside [0, 10]");
  }
  if (request_timeout.count() <= 0) throw ValidationError("model config '" + model_id + "': non-positive timeout");
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j = {{"model_id", model_id},
                      {"endpoint", endpoint},
                      {"max_tokens", max_tokens},
                      {"request_timeout_ms", request_timeout.count()},
                      {"max_retries", max_retries}};
  j["temperature"] = temperature ? nlohmann::json(*temperature) : nlohmann::json("server-default");
  j["top_p"] = top_p ? nlohmann::json(*top_p) : nlohmann::json("server-default");
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json();
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.model_id = j.at("model_id").get<std::string>();
    c.endpoint = j.at("endpoint").get<std::string>();
    if (j.contains("temperature") && j["temperature"].is_number()) c.temperature = j["temperature"].get<double>();
    if (j.contains("top_p") && j["top_p"].is_number()) c.top_p = j["top_p"].get<double>();
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    if (j.contains("seed") && j["seed"].is_number_integer()) c.seed = j["seed"].get<std::int64_t>();
    c.request_timeout = std::chrono::milliseconds(j.value("request_timeout_ms", c.request_timeout.count()));
    c.max_retries = j.value("max_retries", c.max_retries);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<ChatMessage> to_messages(const RenderedPrompt& prompt) {
  std::vector<ChatMessage> out;
  if (prompt.system) out.push_back({"system", *prompt.system});
  out.push_back({"user", prompt.user});
  return out;
}

std::string_view to_string(SentimentLabel l) {
  switch (l) {
    case SentimentLabel::Negative: return "Negative";
    case SentimentLabel::Neutral: return "Neutral";
    case SentimentLabel::Positive: return "Positive";
  }
  return "?";
}

struct ChatGateway::Impl {
  explicit Impl(std::size_t limit) : slots(static_cast<std::ptrdiff_t>(limit)) {}
  std::counting_semaphore<> slots;
  std::atomic<std::size_t> in_flight{0};
};

namespace {

std::string cache_file_name(const std::string& model_id) {
  std::string name = model_id;
  for (auto& c : name) {
    if (c == '/' || c == '\\') c = '_';
  }
  return name + ".jsonl";
}

}  // namespace

ChatGateway::ChatGateway(ModelConfig config, GatewayOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  config_.validate();
  if (options_.concurrency == 0) throw UsageError("gateway concurrency must be at least 1");
  if (!options_.cache_dir.empty()) {
    cache_ = std::make_unique<ResponseCache>(options_.cache_dir / cache_file_name(config_.model_id));
  }
  impl_ = std::make_unique<Impl>(options_.concurrency);
}

ChatGateway::~ChatGateway() = default;

void ChatGateway::flush_cache() {
  if (cache_) cache_->flush();
}

std::string ChatGateway::request(const std::vector<ChatMessage>& messages) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json opts = {{"num_predict", config_.max_tokens}};
  if (config_.temperature) opts["temperature"] = *config_.temperature;
  if (config_.top_p) opts["top_p"] = *config_.top_p;
  if (config_.seed) opts["seed"] = *config_.seed;
  nlohmann::json body = {{"model", config_.model_id}, {"messages", msgs}, {"stream", false}, {"options", opts}};

  impl_->slots.acquire();
  auto n = ++impl_->in_flight;
  struct Release {
    Impl* impl;
    ~Release() {
      --impl->in_flight;
      impl->slots.release();
    }
  } release{impl_.get()};
  if (options_.in_flight_probe) options_.in_flight_probe(n);
  ++network_calls_;

  http::RetryPolicy policy{config_.request_timeout, config_.max_retries, options_.backoff_base};
  auto raw = http::post_json(config_.endpoint, body.dump(), policy);
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(config_.endpoint + ": response is not JSON: " + e.what());
  }
  if (!reply.is_object() || !reply.contains("message") || !reply["message"].is_object() ||
      !reply["message"].contains("content") || !reply["message"]["content"].is_string()) {
    throw ProtocolError(config_.endpoint + ": response lacks message.content");
  }
  return reply["message"]["content"].get<std::string>();
}

ChatResult ChatGateway::chat(const std::vector<ChatMessage>& messages, int attempt) {
  if (messages.empty()) throw UsageError("chat: empty message list");
  auto key = chat_cache_key(config_, messages, attempt);
  if (cache_) {
    if (auto hit = cache_->lookup(key)) {
      ++cache_hits_;
      return {hit->raw_text, hit->latency_ms, true};
    }
  }
  auto start = std::chrono::steady_clock::now();
  auto text = request(messages);
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (cache_) cache_->insert({key, text, ms, utc_timestamp()});
  return {std::move(text), ms, false};
}

std::vector<BatchOutcome> ChatGateway::chat_batch_settled(const std::vector<std::vector<ChatMessage>>& conversations,
                                                          int attempt) {
  std::vector<BatchOutcome> out(conversations.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < conversations.size(); i = next++) {
      try {
        out[i].result = chat(conversations[i], attempt);
      } catch (...) {
        out[i].error = std::current_exception();
      }
    }
  };
  auto n_workers = std::min(options_.concurrency, conversations.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }
  flush_cache();
  return out;
}

std::vector<ChatResult> ChatGateway::chat_batch(const std::vector<std::vector<ChatMessage>>& conversations,
                                                int attempt) {
  auto settled = chat_batch_settled(conversations, attempt);
  std::vector<ChatResult> results;
  results.reserve(settled.size());
  for (auto& s : settled) {
    if (s.error) std::rethrow_exception(s.error);
    results.push_back(std::move(*s.result));
  }
  return results;
}

}  // namespace probe

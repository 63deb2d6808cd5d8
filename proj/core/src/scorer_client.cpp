#include <cmath>

#include "http.hpp"
#include "probe/error.hpp"
#include "probe/gateway.hpp"
#include "probe/tokenize.hpp"

namespace probe {

struct ScorerClient::Impl {
  http::RetryPolicy policy;
};

namespace {

void check_inputs(const std::vector<std::string>& texts, const char* op) {
  if (texts.empty()) throw UsageError(std::string(op) + ": empty input list");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw UsageError(std::string(op) + ": input " + std::to_string(i) + " is empty");
  }
}

SentimentLabel parse_label(const std::string& s, const std::string& where) {
  auto l = to_lower_ascii(s);
  if (l == "negative" || l == "neg") return SentimentLabel::Negative;
  if (l == "neutral" || l == "neu") return SentimentLabel::Neutral;
  if (l == "positive" || l == "pos") return SentimentLabel::Positive;
  throw ProtocolError(where + ": unknown sentiment label '" + s + "'");
}

}  // namespace

ScorerClient::ScorerClient(std::string base_url, ScorerOptions options)
    : base_url_(std::move(base_url)), options_(options), impl_(std::make_unique<Impl>()) {
  if (options_.batch_size == 0) throw UsageError("scorer batch size must be at least 1");
  impl_->policy = {options_.timeout, options_.max_retries, options_.backoff_base};
}

ScorerClient::~ScorerClient() = default;

nlohmann::json ScorerClient::post(const std::string& path, const nlohmann::json& body) {
  auto url = http::join(base_url_, path);
  auto raw = http::post_json(url, body.dump(), impl_->policy);
  try {
    return nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(url + ": response is not JSON: " + e.what());
  }
}

ScorerHealth ScorerClient::health() {
  auto url = http::join(base_url_, "/health");
  auto raw = http::get(url, impl_->policy);
  try {
    auto j = nlohmann::json::parse(raw);
    ScorerHealth h{j.at("status").get<std::string>(), j.at("dim").get<std::size_t>(),
                   j.value("model_tags", nlohmann::json::object())};
    if (h.status != "ok") throw ProtocolError(url + ": status '" + h.status + "'");
    if (h.dim == 0) throw ProtocolError(url + ": declared dim is 0");
    dim_ = h.dim;
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(url + ": malformed health response: " + e.what());
  }
}

std::size_t ScorerClient::declared_dim() {
  if (!dim_) health();
  return *dim_;
}

std::vector<EmbeddingVector> ScorerClient::embed(const std::vector<std::string>& texts) {
  check_inputs(texts, "embed");
  const auto dim = declared_dim();
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t from = 0; from < texts.size(); from += options_.batch_size) {
    auto to = std::min(texts.size(), from + options_.batch_size);
    std::vector<std::string> batch(texts.begin() + from, texts.begin() + to);
    auto j = post("/embed", {{"texts", batch}});
    try {
      if (j.at("dim").get<std::size_t>() != dim) {
        throw ProtocolError("embed: response dim " + j["dim"].dump() + " != declared " + std::to_string(dim));
      }
      auto tag = j.value("model_tag", std::string());
      const auto& vectors = j.at("vectors");
      if (vectors.size() != batch.size()) {
        throw ProtocolError("embed: " + std::to_string(vectors.size()) + " vectors for " +
                            std::to_string(batch.size()) + " inputs");
      }
      for (const auto& v : vectors) {
        EmbeddingVector e{v.get<std::vector<double>>(), tag};
        if (e.values.size() != dim) {
          throw ProtocolError("embed: vector of dimension " + std::to_string(e.values.size()) + ", declared " +
                              std::to_string(dim));
        }
        double sq = 0;
        for (double x : e.values) sq += x * x;
        if (std::abs(std::sqrt(sq) - 1.0) > options_.norm_tolerance) {
          throw ProtocolError("embed: vector norm " + std::to_string(std::sqrt(sq)) + " is not 1");
        }
        out.push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("embed: malformed response: ") + e.what());
    }
  }
  return out;
}

std::vector<SentimentResult> ScorerClient::sentiment(const std::vector<std::string>& texts) {
  check_inputs(texts, "sentiment");
  std::vector<SentimentResult> out;
  out.reserve(texts.size());
  for (std::size_t from = 0; from < texts.size(); from += options_.batch_size) {
    auto to = std::min(texts.size(), from + options_.batch_size);
    std::vector<std::string> batch(texts.begin() + from, texts.begin() + to);
    auto j = post("/sentiment", {{"texts", batch}});
    try {
      const auto& results = j.at("results");
      if (results.size() != batch.size()) {
        throw ProtocolError("sentiment: " + std::to_string(results.size()) + " results for " +
                            std::to_string(batch.size()) + " inputs");
      }
      for (const auto& r : results) {
        SentimentResult s{parse_label(r.at("label").get<std::string>(), "sentiment"),
                          r.at("confidence").get<double>()};
        if (!(s.confidence >= 0 && s.confidence <= 1)) {
          throw ProtocolError("sentiment: confidence " + std::to_string(s.confidence) + " outside [0, 1]");
        }
        out.push_back(s);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("sentiment: malformed response: ") + e.what());
    }
  }
  return out;
}

}  // namespace probe

#include "probe_stub/stubs.hpp"

#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "probe/tokenize.hpp"

namespace probe::stub {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& ws) {
  std::string out;
  for (const auto& w : ws) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

std::string autistic_rewrite(const std::string& target, std::uint64_t h) {
  if (h % 23 == 0) return "Rewritten Sentence:";
  if (h % 29 == 0) return "I'm sorry, but I can't help with rewriting this sentence.";
  auto ws = words(target);
  std::vector<std::string> kept;
  const std::size_t k = 3 + h % 3;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (i % k != k - 1) kept.push_back(ws[i]);
  }
  if (kept.empty()) kept = ws;
  return "To be precise: " + join(kept);
}

std::string neurotypical_rewrite(const std::string& target, std::uint64_t h) {
  static const char* openers[] = {"Well,", "Honestly,", "You know,", "So,"};
  return std::string(openers[h % 4]) + " " + target + (h % 2 ? " I think." : " right?");
}

std::string first_words(std::string_view text, std::size_t n) {
  auto ws = words(text);
  if (ws.size() > n) ws.resize(n);
  return join(ws);
}

std::string codes_reply(const std::string& prompt) {
  // Quote from the coded document so the row passes the invariant.
  auto at = prompt.find("[TEXT: ");
  std::string quote = "the rewrite";
  if (at != std::string::npos) {
    auto text = prompt.substr(at + 7, prompt.find(']', at) - at - 7);
    if (auto q = first_words(text, 4); !q.empty()) quote = q;
  }
  std::string out = "| Theme | Status |\n|---|---|\n\n```codes\n";
  for (const char* t : {"Focus", "Identity", "Impact", "Intent", "Stereotypes", "Tone"}) {
    out += std::string(t) + " | Not Present | - | - | -\n";
  }
  out += "Wording | Present | " + quote + " | word-choice | High\n```";
  return out;
}

std::string codebook_reply(const json& request, const std::string& prompt) {
  auto model = request.value("model", std::string("model"));
  auto tag = std::to_string(fnv1a(prompt) % 1000);
  return "Codebook draft " + tag + " from " + model +
         ".\n\n```codebook\n"
         "Literalness | LIT | Rewrites drop figurative wording | \"To be precise\"\n"
         "Hedging | HDG | Rewrites add softeners | \"I think\"\n"
         "```";
}

}  // namespace

std::string last_user_message(const json& request) {
  const auto& msgs = request.at("messages");
  if (msgs.empty()) return {};
  return msgs.back().value("content", std::string());
}

std::string target_sentence(std::string_view prompt) {
  const std::string_view key = "Target sentence: ";
  auto at = prompt.find(key);
  if (at == std::string_view::npos) return {};
  auto start = at + key.size();
  auto end = prompt.find('\n', start);
  return std::string(prompt.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

ChatReply scripted_reply(const json& request) {
  const auto prompt = last_user_message(request);
  const auto model = request.value("model", std::string());
  if (contains(prompt, "```codes")) return {200, codes_reply(prompt)};
  if (contains(prompt, "```codebook")) return {200, codebook_reply(request, prompt)};
  if (auto target = target_sentence(prompt); !target.empty()) {
    auto h = fnv1a(model + "\n" + target);
    if (contains(prompt, "an autistic person talking")) return {200, autistic_rewrite(target, h)};
    if (contains(prompt, "a neurotypical person talking")) return {200, neurotypical_rewrite(target, h)};
    return {200, "Label: " + std::to_string(h % 2)};
  }
  return {200, "Noted (" + model + ", " + std::to_string(fnv1a(prompt) % 100000) + ")."};
}

struct ServerThread {
  httplib::Server server;
  std::thread thread;

  int start() {
    int port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
    return port;
  }
  ~ServerThread() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

struct ChatStub::Impl {
  ServerThread srv;
  mutable std::mutex mu;
  std::vector<json> received;
};

ChatStub::ChatStub(ChatScript script) : impl_(std::make_unique<Impl>()) {
  impl_->srv.server.Post("/api/chat", [this, script = std::move(script)](const httplib::Request& req,
                                                                         httplib::Response& res) {
    ++requests_;
    auto now = ++in_flight_;
    for (auto prev = max_in_flight_.load(); now > prev && !max_in_flight_.compare_exchange_weak(prev, now);) {
    }
    if (auto d = delay_ms_.load(); d > 0) std::this_thread::sleep_for(std::chrono::milliseconds(d));
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      --in_flight_;
      res.status = 400;
      return;
    }
    {
      std::lock_guard lock(impl_->mu);
      impl_->received.push_back(body);
    }
    auto reply = script(body);
    res.status = reply.status;
    if (reply.status / 100 == 2) {
      json out = {{"model", body.value("model", "")},
                  {"message", {{"role", "assistant"}, {"content", reply.content}}},
                  {"done", true}};
      res.set_content(out.dump(), "application/json");
    } else {
      res.set_content(reply.content, "text/plain");
    }
    --in_flight_;
  });
  port_ = impl_->srv.start();
}

// Stop the server before the counters its handlers touch go away.
ChatStub::~ChatStub() { impl_.reset(); }

std::string ChatStub::endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/api/chat"; }

std::vector<json> ChatStub::received() const {
  std::lock_guard lock(impl_->mu);
  return impl_->received;
}

std::vector<double> hashed_embedding(std::string_view text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  for (const auto& tok : tokenize(text)) {
    auto h = fnv1a(tok);
    v[h % dim] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0;
  for (double x : v) norm += x * x;
  if (norm == 0) {
    v[0] = 1.0;
    return v;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

LexiconSentiment lexicon_sentiment(std::string_view text) {
  static const char* positive[] = {"love", "like", "great", "good", "happy", "enjoy", "wonderful"};
  static const char* negative[] = {"hate", "bad", "awful", "terrible", "sad", "angry", "sorry"};
  int score = 0;
  for (const auto& tok : tokenize(text)) {
    for (auto* p : positive) score += tok == p;
    for (auto* n : negative) score -= tok == n;
  }
  if (score == 0) return {"Neutral", 0.6};
  double conf = 0.5 + 0.5 * std::abs(score) / (std::abs(score) + 1.0);
  return {score > 0 ? "Positive" : "Negative", conf};
}

struct ScorerStub::Impl {
  ServerThread srv;
};

ScorerStub::ScorerStub(std::size_t dim) : impl_(std::make_unique<Impl>()), dim_(dim) {
  auto& s = impl_->srv.server;
  s.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    ++requests_;
    json out = {{"status", "ok"}, {"dim", dim_}, {"model_tags", {{"embed", "stub-hash"}, {"sentiment", "stub-lexicon"}}}};
    res.set_content(out.dump(), "application/json");
  });
  auto texts_of = [](const httplib::Request& req, httplib::Response& res, std::vector<std::string>& texts) {
    try {
      texts = json::parse(req.body).at("texts").get<std::vector<std::string>>();
      return true;
    } catch (const json::exception& e) {
      res.status = 422;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      return false;
    }
  };
  s.Post("/embed", [this, texts_of](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    std::vector<std::string> texts;
    if (!texts_of(req, res, texts)) return;
    json vectors = json::array();
    for (const auto& t : texts) vectors.push_back(hashed_embedding(t, dim_));
    res.set_content(json{{"dim", dim_}, {"model_tag", "stub-hash"}, {"vectors", vectors}}.dump(), "application/json");
  });
  s.Post("/sentiment", [this, texts_of](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    std::vector<std::string> texts;
    if (!texts_of(req, res, texts)) return;
    json results = json::array();
    for (const auto& t : texts) {
      auto r = lexicon_sentiment(t);
      results.push_back({{"label", r.label}, {"confidence", r.confidence}});
    }
    res.set_content(json{{"results", results}}.dump(), "application/json");
  });
  port_ = impl_->srv.start();
}

ScorerStub::~ScorerStub() { impl_.reset(); }

std::string ScorerStub::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

}  // namespace probe::stub

#include "http.hpp"

#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "probe/error.hpp"

namespace probe::http {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.compare(0, scheme_end, "http") != 0) {
    throw UsageError("unsupported endpoint URL '" + url + "' (expected http://host[:port]/path)");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable(int status) { return status == 429 || status >= 500; }

template <typename Call>
std::string with_retry(const std::string& url, const RetryPolicy& policy, Call call) {
  auto u = split(url);
  int last_status = 0;
  std::string last_error;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = policy.backoff_base * (1 << (attempt - 1));
      spdlog::debug("retrying {} in {} ms (attempt {})", url, delay.count(), attempt + 1);
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(u.origin);
    client.set_connection_timeout(policy.timeout);
    client.set_read_timeout(policy.timeout);
    client.set_write_timeout(policy.timeout);
    auto res = call(client, u.path);
    if (!res) {
      last_status = 0;
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    last_status = res->status;
    last_error = res->body;
    if (!retryable(res->status)) break;
  }
  if (last_status == 0) {
    throw TransportError(url + ": " + last_error + " after " + std::to_string(policy.max_retries + 1) + " attempts",
                         url);
  }
  throw UpstreamError(url + ": HTTP " + std::to_string(last_status) + (last_error.empty() ? "" : ": " + last_error),
                      last_status);
}

}  // namespace

std::string post_json(const std::string& url, const std::string& body, const RetryPolicy& policy) {
  return with_retry(url, policy, [&](httplib::Client& c, const std::string& path) {
    return c.Post(path, body, "application/json");
  });
}

std::string get(const std::string& url, const RetryPolicy& policy) {
  return with_retry(url, policy, [&](httplib::Client& c, const std::string& path) { return c.Get(path); });
}

std::string join(const std::string& base, const std::string& path) {
  if (!base.empty() && base.back() == '/') return base.substr(0, base.size() - 1) + path;
  return base + path;
}

}  // namespace probe::http

#pragma once

#include <chrono>
#include <string>

// Thin retrying HTTP helpers; the only place cpp-httplib is included.
namespace probe::http {

struct RetryPolicy {
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{250};
};

/// POSTs a JSON body and returns the 2xx response body. Retries transport
/// failures, 429 and 5xx with exponential backoff. Throws TransportError when
/// the server never answered, UpstreamError for any other final status.
std::string post_json(const std::string& url, const std::string& body, const RetryPolicy& policy);
std::string get(const std::string& url, const RetryPolicy& policy);

/// Joins a base URL and an absolute path without doubling the slash.
std::string join(const std::string& base, const std::string& path);

}  // namespace probe::http

#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace probe {

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// Serialization used for every digest: compact, keys sorted, UTF-8.
std::string canonical_json(const nlohmann::json& value);

inline std::string digest_json(const nlohmann::json& value) {
  return sha256_hex(canonical_json(value));
}

}  // namespace probe

#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "probe/corpus.hpp"

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "probe") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Deterministic synthetic corpus; every third record lacks a preceding
/// sentence and every fourth a following one.
inline std::vector<probe::SentenceRecord> synthetic_corpus(std::size_t n, std::uint64_t seed = 1) {
  static const char* vocab[] = {"i",    "never", "really", "talk", "about", "it",     "because", "people",
                                "say",  "that",  "is",     "odd",  "love",  "hate",   "the",     "meeting",
                                "was",  "long",  "and",    "we",   "left",  "early", "honestly", "fine"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(vocab) - 1), len(5, 14), bit(0, 1);
  std::vector<probe::SentenceRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    probe::SentenceRecord r;
    r.id = "r" + std::string(i < 10 ? "00" : i < 100 ? "0" : "") + std::to_string(i);
    std::string t;
    for (std::size_t k = len(rng); k > 0; --k) t += std::string(t.empty() ? "" : " ") + vocab[pick(rng)];
    r.target = t + ".";
    if (i % 3) r.preceding = "That week was busy.";
    if (i % 4) r.following = "Anyway, we moved on.";
    for (const char* a : {"a1", "a2", "a3"}) r.labels[a] = static_cast<int>(bit(rng));
    out.push_back(std::move(r));
  }
  return out;
}

/// Sets an environment variable for the lifetime of the guard.
class EnvGuard {
 public:
  EnvGuard(const char* name, const std::string& value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    ::setenv(name, value.c_str(), 1);
  }
  ~EnvGuard() {
    if (old_) ::setenv(name_, old_->c_str(), 1);
    else ::unsetenv(name_);
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

}  // namespace testing_support

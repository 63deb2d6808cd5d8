#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/condition.hpp"

namespace probe {

/// Provenance of one (model, condition) generation run.
struct RunManifest {
  std::string run_id;
  std::string corpus_hash;
  std::string config_hash;
  std::string model_id;
  Condition condition = Condition::ZeroShot;
  std::string timestamp;
  nlohmann::json settings = nlohmann::json::object();  // effective sampling settings
};

/// First 16 hex digits of SHA-256 over (corpus-hash, config-hash, model-id,
/// condition). Identical inputs always name the same run.
std::string derive_run_id(const std::string& corpus_hash, const std::string& config_hash,
                          const std::string& model_id, Condition condition);

/// The manifest.json at the root of an output directory: pipeline-level
/// digests plus one RunManifest per generation run.
struct PipelineManifest {
  std::string run_id;
  std::string corpus_hash;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string created;
  std::vector<RunManifest> runs;
  std::map<std::string, std::string> stages;  // stage name -> completion timestamp

  static constexpr const char* kFileName = "manifest.json";

  nlohmann::json to_json() const;
  static PipelineManifest from_json(const nlohmann::json& j);

  void write(const std::filesystem::path& dir) const;
  static PipelineManifest read(const std::filesystem::path& dir);
};

}  // namespace probe

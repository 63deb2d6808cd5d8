#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/compliance.hpp"
#include "probe/condition.hpp"
#include "probe/gateway.hpp"
#include "probe/prompt.hpp"
#include "probe/qual.hpp"
#include "probe/stats.hpp"

namespace probe {

struct QualConfig {
  std::vector<qual::AgentSpec> inductive_coders;
  std::vector<qual::AgentSpec> deductive_coders;
  std::optional<qual::AgentSpec> synthesizer;
  bool structured_footer = true;
  /// Model sets (one per annotator model) included in each inductive slice.
  std::size_t deep_read_sets = 3;
  /// Records per set; taken from agreement bands when `scores` is given.
  std::size_t records_per_set = 15;
  /// Reasoning excerpts coded by each deductive coder.
  std::size_t deductive_documents = 15;
  std::optional<std::filesystem::path> scores;
};

/// Everything a pipeline command needs. Loaded from a JSON file; relative
/// paths resolve against the file's directory. Keys are listed in README.md.
struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path output_dir = "out";
  std::filesystem::path cache_dir;  // defaults to <output_dir>/cache
  std::optional<std::filesystem::path> templates_dir;
  std::string scorer_url = "http://127.0.0.1:8090";
  std::size_t concurrency = 4;
  std::uint64_t seed = 0;
  std::vector<Condition> conditions{Condition::RewriteAutistic, Condition::RewriteNt};
  /// When set, requesting either rewrite condition runs both.
  bool persona_pair = true;
  bool keep_save_instruction = true;
  std::vector<ModelConfig> models;
  RuleConfig rules;
  stats::StatOptions stats;
  std::size_t top_k = 20;
  double collapse_threshold = stats::kCollapseThreshold;
  std::optional<std::filesystem::path> icl_examples_a;
  std::optional<std::filesystem::path> icl_examples_b;
  std::chrono::milliseconds backoff_base{250};
  QualConfig qual;
  std::optional<std::filesystem::path> profiles;
  double label_threshold = 0.5;

  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& file);

  /// PROBE_SCORER_URL and PROBE_CACHE_DIR, when set, replace the file values.
  void apply_env();
  /// Keeps only the named models; throws UsageError for unknown names.
  void restrict_models(const std::vector<std::string>& ids);

  /// Conditions to run, with the persona pair completed when enabled.
  std::vector<Condition> effective_conditions() const;
  std::filesystem::path effective_cache_dir() const;

  /// Settings that determine results, without file locations.
  nlohmann::json hashed_settings() const;
  std::string config_hash() const;

  /// Checks ranges and that referenced input files exist.
  void validate() const;

  /// Built-ins, overlaid with templates_dir when set.
  TemplateSet templates() const;
  std::vector<IclExample> icl_examples(Condition c) const;
};

}  // namespace probe

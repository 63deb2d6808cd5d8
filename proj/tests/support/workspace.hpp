#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "probe/config.hpp"
#include "probe/corpus.hpp"

namespace testing_support {

struct WorkspaceSpec {
  std::string chat_endpoint;
  std::string scorer_url;
  std::size_t records = 10;
  std::vector<std::string> models{"stub-a"};
  std::vector<std::string> conditions{"Rewrite-Autistic"};
  bool with_qual = false;
  std::uint64_t seed = 7;
};

inline nlohmann::json model_json(const std::string& id, const std::string& endpoint) {
  return {{"model_id", id}, {"endpoint", endpoint}, {"temperature", 0}, {"max_retries", 0}};
}

/// Writes corpus.csv, profiles.csv and config.json under `dir`; returns the
/// config path.
inline std::filesystem::path write_workspace(const std::filesystem::path& dir, const WorkspaceSpec& spec) {
  std::filesystem::create_directories(dir);
  auto corpus = synthetic_corpus(spec.records, spec.seed);
  probe::save_corpus(dir / "corpus.csv", corpus, probe::CorpusFormat::Csv);
  {
    std::ofstream p(dir / "profiles.csv");
    p << "annotator_id,team_id,aq,sata,iat\na1,t1,10,20,10\na2,t1,20,30,30\na3,t2,30,10,20\n";
  }
  nlohmann::json j = {{"corpus", "corpus.csv"},
                      {"output_dir", "out"},
                      {"scorer_url", spec.scorer_url},
                      {"seed", spec.seed},
                      {"backoff_ms", 1},
                      {"conditions", spec.conditions},
                      {"stats", {{"resamples", 1000}}},
                      {"groundtruth", {{"profiles", "profiles.csv"}}}};
  j["models"] = nlohmann::json::array();
  for (const auto& m : spec.models) j["models"].push_back(model_json(m, spec.chat_endpoint));
  if (spec.with_qual) {
    auto agent = [&](const std::string& id) {
      return nlohmann::json{{"agent_id", id}, {"model", model_json(spec.models.front(), spec.chat_endpoint)}};
    };
    j["qual"] = {{"inductive_coders", {agent("c1"), agent("c2"), agent("c3")}},
                 {"deductive_coders", {agent("d1"), agent("d2"), agent("d3")}},
                 {"synthesizer", agent("syn")},
                 {"records_per_set", 5},
                 {"deductive_documents", 15}};
  }
  std::ofstream(dir / "config.json") << j.dump(2);
  return dir / "config.json";
}

}  // namespace testing_support

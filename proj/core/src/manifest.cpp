#include "probe/manifest.hpp"

#include "probe/digest.hpp"
#include "probe/error.hpp"
#include "probe/io.hpp"

namespace probe {

using nlohmann::json;

std::string derive_run_id(const std::string& corpus_hash, const std::string& config_hash,
                          const std::string& model_id, Condition condition) {
  json key = {{"corpus_hash", corpus_hash},
              {"config_hash", config_hash},
              {"model_id", model_id},
              {"condition", std::string(to_string(condition))}};
  return digest_json(key).substr(0, 16);
}

json PipelineManifest::to_json() const {
  json runs_json = json::array();
  for (const auto& r : runs) {
    runs_json.push_back({{"run_id", r.run_id},
                         {"corpus_hash", r.corpus_hash},
                         {"config_hash", r.config_hash},
                         {"model_id", r.model_id},
                         {"condition", std::string(to_string(r.condition))},
                         {"timestamp", r.timestamp},
                         {"settings", r.settings}});
  }
  return {{"run_id", run_id},       {"corpus_hash", corpus_hash}, {"config_hash", config_hash},
          {"seed", seed},           {"created", created},         {"runs", runs_json},
          {"stages", stages}};
}

PipelineManifest PipelineManifest::from_json(const json& j) {
  PipelineManifest m;
  try {
    m.run_id = j.at("run_id").get<std::string>();
    m.corpus_hash = j.at("corpus_hash").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.created = j.value("created", "");
    for (const auto& r : j.at("runs")) {
      RunManifest rm;
      rm.run_id = r.at("run_id").get<std::string>();
      rm.corpus_hash = r.at("corpus_hash").get<std::string>();
      rm.config_hash = r.at("config_hash").get<std::string>();
      rm.model_id = r.at("model_id").get<std::string>();
      auto cond = parse_condition(r.at("condition").get<std::string>());
      if (!cond) throw SchemaError("manifest: unknown condition " + r.at("condition").dump());
      rm.condition = *cond;
      rm.timestamp = r.value("timestamp", "");
      rm.settings = r.value("settings", json::object());
      m.runs.push_back(std::move(rm));
    }
    if (j.contains("stages")) m.stages = j.at("stages").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
  return m;
}

void PipelineManifest::write(const std::filesystem::path& dir) const {
  write_file_atomic(dir / kFileName, to_json().dump(2) + "\n");
}

PipelineManifest PipelineManifest::read(const std::filesystem::path& dir) {
  auto path = dir / kFileName;
  if (!std::filesystem::exists(path)) throw UsageError("no manifest at " + path.string());
  try {
    return from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw SchemaError("manifest: " + std::string(e.what()));
  }
}

}  // namespace probe

#include "probe/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "probe/csv.hpp"
#include "probe/digest.hpp"
#include "probe/error.hpp"
#include "probe/io.hpp"

namespace probe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::optional<fs::path> opt_path(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return resolve(base, j.at(key).get<std::string>());
}

qual::AgentSpec agent_from_json(const json& j, qual::Role role) {
  qual::AgentSpec a;
  a.agent_id = j.at("agent_id").get<std::string>();
  a.model = ModelConfig::from_json(j.at("model"));
  a.role = role;
  return a;
}

std::vector<qual::AgentSpec> agents_from_json(const json& j, const char* key, qual::Role role) {
  std::vector<qual::AgentSpec> out;
  if (!j.contains(key)) return out;
  for (const auto& a : j.at(key)) out.push_back(agent_from_json(a, role));
  return out;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ValidationError(what + " not found: " + p.string());
}

std::string template_digest(const TemplateSet& t) {
  json j = json::object();
  for (const auto& k : t.keys()) {
    const auto& tm = t.get(k);
    j[k] = {{"user", tm.user_text}, {"system", tm.system_text ? json(*tm.system_text) : json(nullptr)}};
  }
  return digest_json(j);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    c.corpus = resolve(base_dir, j.at("corpus").get<std::string>());
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    else c.output_dir = resolve(base_dir, "out");
    if (auto p = opt_path(j, "cache_dir", base_dir)) c.cache_dir = *p;
    c.templates_dir = opt_path(j, "templates_dir", base_dir);
    c.scorer_url = j.value("scorer_url", c.scorer_url);
    c.concurrency = j.value("concurrency", c.concurrency);
    c.seed = j.value("seed", c.seed);
    if (j.contains("conditions")) {
      c.conditions.clear();
      for (const auto& name : j.at("conditions")) {
        auto cond = parse_condition(name.get<std::string>());
        if (!cond) throw ValidationError("unknown condition '" + name.get<std::string>() + "'");
        c.conditions.push_back(*cond);
      }
    }
    c.persona_pair = j.value("persona_pair", c.persona_pair);
    c.keep_save_instruction = j.value("keep_save_instruction", c.keep_save_instruction);
    if (j.contains("backoff_ms")) c.backoff_base = std::chrono::milliseconds(j.at("backoff_ms").get<long>());
    for (const auto& m : j.value("models", json::array())) c.models.push_back(ModelConfig::from_json(m));
    if (j.contains("rules")) c.rules = RuleConfig::from_json(j.at("rules"));
    if (j.contains("stats")) {
      const auto& s = j.at("stats");
      c.stats.resamples = s.value("resamples", c.stats.resamples);
      c.stats.level = s.value("level", c.stats.level);
      c.stats.alpha = s.value("alpha", c.stats.alpha);
      c.stats.exact_max = s.value("exact_max", c.stats.exact_max);
    }
    if (j.contains("report")) {
      const auto& r = j.at("report");
      c.top_k = r.value("top_k", c.top_k);
      c.collapse_threshold = r.value("collapse_threshold", c.collapse_threshold);
    }
    if (j.contains("icl")) {
      c.icl_examples_a = opt_path(j.at("icl"), "examples_a", base_dir);
      c.icl_examples_b = opt_path(j.at("icl"), "examples_b", base_dir);
    }
    if (j.contains("qual")) {
      const auto& q = j.at("qual");
      c.qual.inductive_coders = agents_from_json(q, "inductive_coders", qual::Role::InductiveCoder);
      c.qual.deductive_coders = agents_from_json(q, "deductive_coders", qual::Role::DeductiveCoder);
      if (q.contains("synthesizer")) c.qual.synthesizer = agent_from_json(q.at("synthesizer"), qual::Role::Synthesizer);
      c.qual.structured_footer = q.value("structured_footer", c.qual.structured_footer);
      c.qual.deep_read_sets = q.value("deep_read_sets", c.qual.deep_read_sets);
      c.qual.records_per_set = q.value("records_per_set", c.qual.records_per_set);
      c.qual.deductive_documents = q.value("deductive_documents", c.qual.deductive_documents);
      c.qual.scores = opt_path(q, "scores", base_dir);
    }
    if (j.contains("groundtruth")) {
      const auto& g = j.at("groundtruth");
      c.profiles = opt_path(g, "profiles", base_dir);
      c.label_threshold = g.value("threshold", c.label_threshold);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& file) {
  json j;
  try {
    j = json::parse(read_text_file(file));
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + file.string() + ": " + e.what());
  }
  auto base = fs::absolute(file).parent_path();
  auto c = from_json(j, base);
  c.apply_env();
  return c;
}

void PipelineConfig::apply_env() {
  if (const char* url = std::getenv("PROBE_SCORER_URL"); url && *url) scorer_url = url;
  if (const char* dir = std::getenv("PROBE_CACHE_DIR"); dir && *dir) cache_dir = dir;
}

void PipelineConfig::restrict_models(const std::vector<std::string>& ids) {
  if (ids.empty()) return;
  std::vector<ModelConfig> kept;
  for (const auto& id : ids) {
    auto it = std::find_if(models.begin(), models.end(), [&](const ModelConfig& m) { return m.model_id == id; });
    if (it == models.end()) throw UsageError("model '" + id + "' is not in the config");
    kept.push_back(*it);
  }
  models = std::move(kept);
}

std::vector<Condition> PipelineConfig::effective_conditions() const {
  std::set<Condition> s(conditions.begin(), conditions.end());
  if (persona_pair && (s.count(Condition::RewriteAutistic) || s.count(Condition::RewriteNt))) {
    s.insert(Condition::RewriteAutistic);
    s.insert(Condition::RewriteNt);
  }
  return {s.begin(), s.end()};
}

fs::path PipelineConfig::effective_cache_dir() const { return cache_dir.empty() ? output_dir / "cache" : cache_dir; }

json PipelineConfig::hashed_settings() const {
  json j;
  j["models"] = json::array();
  for (const auto& m : models) {
    auto mj = m.to_json();
    mj.erase("endpoint");
    mj.erase("request_timeout_ms");
    mj.erase("max_retries");
    j["models"].push_back(mj);
  }
  j["conditions"] = json::array();
  for (auto c : effective_conditions()) j["conditions"].push_back(std::string(to_string(c)));
  j["keep_save_instruction"] = keep_save_instruction;
  j["rules"] = rules.to_json();
  j["stats"] = {{"resamples", stats.resamples}, {"level", stats.level}, {"alpha", stats.alpha},
                {"exact_max", stats.exact_max}};
  j["seed"] = seed;
  j["templates"] = template_digest(templates());
  return j;
}

std::string PipelineConfig::config_hash() const { return digest_json(hashed_settings()); }

void PipelineConfig::validate() const {
  require_file(corpus, "corpus");
  if (templates_dir && !fs::is_directory(*templates_dir)) {
    throw ValidationError("templates_dir is not a directory: " + templates_dir->string());
  }
  if (concurrency == 0) throw ValidationError("concurrency must be at least 1");
  if (conditions.empty()) throw ValidationError("conditions must not be empty");
  std::set<std::string> ids;
  for (const auto& m : models) {
    m.validate();
    if (!ids.insert(m.model_id).second) throw ValidationError("duplicate model_id '" + m.model_id + "'");
  }
  rules.validate();
  if (stats.resamples == 0) throw ValidationError("stats.resamples must be positive");
  if (!(stats.level > 0 && stats.level < 1)) throw ValidationError("stats.level must be in (0, 1)");
  if (!(stats.alpha > 0 && stats.alpha < 1)) throw ValidationError("stats.alpha must be in (0, 1)");
  if (!(label_threshold >= 0 && label_threshold <= 1)) throw ValidationError("groundtruth.threshold must be in [0, 1]");
  for (auto c : conditions) {
    if (c == Condition::IclA && !icl_examples_a) throw ValidationError("ICL-A requires icl.examples_a");
    if (c == Condition::IclB && !icl_examples_b) throw ValidationError("ICL-B requires icl.examples_b");
  }
  for (const auto* p : {&icl_examples_a, &icl_examples_b, &qual.scores, &profiles}) {
    if (*p) require_file(**p, "input file");
  }
}

TemplateSet PipelineConfig::templates() const {
  if (templates_dir) return TemplateSet::load_directory(*templates_dir);
  return TemplateSet::builtin();
}

std::vector<IclExample> PipelineConfig::icl_examples(Condition c) const {
  const auto& path = c == Condition::IclA ? icl_examples_a : c == Condition::IclB ? icl_examples_b : std::nullopt;
  if (!path) return {};
  auto t = csv::read_file(path->string());
  auto text = t.column("text"), label = t.column("label");
  if (!text || !label) throw SchemaError("ICL examples need columns text,label: " + path->string());
  std::vector<IclExample> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& l = t.rows[r][*label];
    if (l != "0" && l != "1") throw SchemaError("label must be 0 or 1", r + 1, "label");
    out.push_back({t.rows[r][*text], l == "1" ? 1 : 0});
  }
  return out;
}

}  // namespace probe

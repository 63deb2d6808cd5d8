#include "probe/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "probe/compliance.hpp"
#include "probe/corpus.hpp"
#include "probe/csv.hpp"
#include "probe/digest.hpp"
#include "probe/error.hpp"
#include "probe/gateway.hpp"
#include "probe/ground_truth.hpp"
#include "probe/io.hpp"
#include "probe/manifest.hpp"
#include "probe/qual.hpp"
#include "probe/report.hpp"
#include "probe/stats.hpp"
#include "probe/text_metrics.hpp"

namespace probe {

namespace fs = std::filesystem;

namespace {

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const TransportError*>(&e)) return "transport";
  if (dynamic_cast<const UpstreamError*>(&e)) return "upstream";
  if (dynamic_cast<const ProtocolError*>(&e)) return "protocol";
  if (dynamic_cast<const RenderError*>(&e)) return "render";
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  return "error";
}

std::pair<std::string, std::string> describe(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const std::exception& e) {
    return {error_kind(e), e.what()};
  } catch (...) {
    return {"error", "unknown exception"};
  }
}

std::string require_input(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw UsageError(fmt::format("{} not found; run `probe {}` first", path.string(), producer));
  }
  return read_text_file(path);
}

void write_output(CommandResult& r, const fs::path& path, std::string_view contents) {
  write_file_atomic(path, contents);
  r.outputs.push_back(path);
}

std::string pipeline_run_id(const std::string& corpus_hash, const std::string& config_hash) {
  return sha256_hex(corpus_hash + config_hash).substr(0, 16);
}

std::string corpus_hash_of(const PipelineConfig& config) { return corpus_hash(load_corpus(config.corpus)); }

// Records the stage in manifest.json, creating the manifest when a command
// runs before `rewrite` (groundtruth, qual).
void mark_stage(const PipelineConfig& config, const std::string& stage, const std::string* corpus_hash = nullptr) {
  PipelineManifest m;
  if (fs::exists(config.output_dir / PipelineManifest::kFileName)) {
    m = PipelineManifest::read(config.output_dir);
  } else {
    m.corpus_hash = corpus_hash ? *corpus_hash : corpus_hash_of(config);
    m.config_hash = config.config_hash();
    m.seed = config.seed;
    m.run_id = pipeline_run_id(m.corpus_hash, m.config_hash);
    m.created = utc_timestamp();
  }
  m.stages[stage] = utc_timestamp();
  m.write(config.output_dir);
}

}  // namespace

CommandResult cmd_rewrite(const PipelineConfig& config) {
  config.validate();
  if (config.models.empty()) throw UsageError("no models configured");
  CommandResult result;
  const auto corpus = load_corpus(config.corpus);
  const auto templates = config.templates();
  const auto chash = corpus_hash(corpus);
  const auto cfg_hash = config.config_hash();
  const auto now = utc_timestamp();
  const auto conditions = config.effective_conditions();

  PipelineManifest manifest;
  manifest.corpus_hash = chash;
  manifest.config_hash = cfg_hash;
  manifest.seed = config.seed;
  manifest.run_id = pipeline_run_id(chash, cfg_hash);
  manifest.created = now;

  GatewayOptions gopts;
  gopts.cache_dir = config.effective_cache_dir();
  gopts.concurrency = config.concurrency;
  gopts.backoff_base = config.backoff_base;

  std::string responses, errors;
  csv::append_row(responses, std::vector<std::string>{"record-id", "model-id", "condition", "response"});
  csv::append_row(errors, std::vector<std::string>{"record-id", "model-id", "condition", "kind", "message"});

  // (model, record) -> raw output per persona
  std::map<std::pair<std::string, std::string>, std::map<Persona, std::string>> rewrites;

  for (const auto& model : config.models) {
    ChatGateway gateway(model, gopts);
    RenderOptions ropts{model.model_id, config.keep_save_instruction};
    for (auto cond : conditions) {
      std::optional<Persona> persona;
      if (cond == Condition::RewriteAutistic) persona = Persona::Autistic;
      if (cond == Condition::RewriteNt) persona = Persona::Neurotypical;
      const auto examples = config.icl_examples(cond);

      std::vector<std::vector<ChatMessage>> batch;
      batch.reserve(corpus.size());
      for (const auto& rec : corpus) batch.push_back(to_messages(render(rec, cond, persona, examples, ropts, templates)));
      auto outcomes = gateway.chat_batch_settled(batch);

      std::size_t failed = 0;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& rec = corpus[i];
        const std::string cname(to_string(cond));
        if (outcomes[i].error) {
          auto [kind, msg] = describe(outcomes[i].error);
          csv::append_row(errors, std::vector<std::string>{rec.id, model.model_id, cname, kind, msg});
          result.fail(fmt::format("{} / {} / {}: {}", model.model_id, cname, rec.id, msg));
          ++failed;
          continue;
        }
        const auto& text = outcomes[i].result->text;
        csv::append_row(responses, std::vector<std::string>{rec.id, model.model_id, cname, text});
        if (persona) rewrites[{model.model_id, rec.id}][*persona] = text;
      }
      spdlog::info("{} {}: {} ok, {} failed", model.model_id, to_string(cond), corpus.size() - failed, failed);

      RunManifest run;
      run.run_id = derive_run_id(chash, cfg_hash, model.model_id, cond);
      run.corpus_hash = chash;
      run.config_hash = cfg_hash;
      run.model_id = model.model_id;
      run.condition = cond;
      run.timestamp = now;
      run.settings = model.to_json();
      run.settings["records"] = corpus.size();
      run.settings["failed"] = failed;
      manifest.runs.push_back(std::move(run));
    }
    gateway.flush_cache();
    spdlog::info("{}: {} network calls, {} cache hits", model.model_id, gateway.network_calls(), gateway.cache_hits());
  }

  std::vector<RewritePair> pairs;
  for (const auto& model : config.models) {
    for (const auto& rec : corpus) {
      auto it = rewrites.find({model.model_id, rec.id});
      if (it == rewrites.end() || it->second.size() != 2) continue;
      RewritePair p;
      p.record_id = rec.id;
      p.model_id = model.model_id;
      p.raw_aut = it->second.at(Persona::Autistic);
      p.raw_nt = it->second.at(Persona::Neurotypical);
      p.verdict_aut = classify(p.raw_aut, rec.target, config.rules);
      p.verdict_nt = classify(p.raw_nt, rec.target, config.rules);
      pairs.push_back(std::move(p));
    }
  }

  fs::create_directories(config.output_dir);
  write_output(result, config.output_dir / kResponsesCsv, responses);
  write_output(result, config.output_dir / kErrorsCsv, errors);
  if (std::any_of(conditions.begin(), conditions.end(), [](Condition c) { return is_rewrite(c); })) {
    write_output(result, config.output_dir / kRewritesCsv, format_rewrites_csv(pairs));
  }
  manifest.stages["rewrite"] = now;
  manifest.write(config.output_dir);
  result.outputs.push_back(config.output_dir / PipelineManifest::kFileName);
  result.notes.push_back(fmt::format("{} rewrite pairs, {} errors", pairs.size(), result.errors.size()));
  return result;
}

CommandResult cmd_score(const PipelineConfig& config) {
  CommandResult result;
  auto pairs = parse_rewrites_csv(require_input(config.output_dir / kRewritesCsv, "rewrite"));
  if (pairs.empty()) throw UsageError("no rewrite outputs in " + config.output_dir.string() + "; run `probe rewrite` first");
  const auto corpus = load_corpus(config.corpus);

  auto filtered = exclusion_filter(std::move(pairs));
  for (const auto& [cls, n] : filtered.pair_counts) spdlog::info("excluded {} pairs as {}", n, to_string(cls));
  write_output(result, config.output_dir / kExclusionsCsv, format_exclusions_csv(filtered));

  ScorerClient scorer(config.scorer_url);
  auto rows = filtered.valid.empty() ? std::vector<MetricRow>{} : score_pairs(filtered.valid, corpus, scorer);
  write_output(result, config.output_dir / kMetricsCsv, format_metrics_csv(rows));
  result.notes.push_back(fmt::format("{} valid pairs scored, {} excluded", rows.size(), filtered.excluded.size()));
  mark_stage(config, "score");
  return result;
}

CommandResult cmd_stats(const PipelineConfig& config) {
  CommandResult result;
  auto rows = parse_metrics_csv(require_input(config.output_dir / kMetricsCsv, "score"));
  if (rows.empty()) throw UsageError("metrics.csv has no rows; nothing to test");

  auto opts = config.stats;
  opts.seed = config.seed;
  std::vector<stats::StatResult> results;
  for (const auto& metric : stats::metric_names()) {
    results.push_back(stats::analyze(metric, stats::paired_deltas(rows, metric), opts));
  }
  write_output(result, config.output_dir / kStatsCsv, stats::format_stats_csv(results));
  write_output(result, config.output_dir / kTable1Md, stats::format_table1(results, opts.alpha, opts.level));
  mark_stage(config, "stats");
  return result;
}

CommandResult cmd_report(const PipelineConfig& config) {
  CommandResult result;
  auto rows = parse_metrics_csv(require_input(config.output_dir / kMetricsCsv, "score"));
  require_input(config.output_dir / kStatsCsv, "stats");
  auto pairs = parse_rewrites_csv(require_input(config.output_dir / kRewritesCsv, "rewrite"));
  const auto dir = config.output_dir / kReportDir;
  fs::create_directories(dir);

  for (const auto& [name, svg] : report::metric_charts(rows)) write_output(result, dir / name, svg);
  write_output(result, dir / "failure_modes.md", report::failure_mode_table(pairs, rows));
  auto collapse = stats::collapse_report(rows, config.collapse_threshold);
  write_output(result, dir / "collapse.md", report::collapse_table(collapse, config.collapse_threshold));

  std::vector<std::string> aut, nt;
  for (const auto& p : pairs) {
    aut.push_back(p.raw_aut);
    nt.push_back(p.raw_nt);
  }
  std::string tokens;
  try {
    tokens = report::token_delta_table(token_frequency_delta(aut, nt, config.top_k));
  } catch (const UsageError& e) {
    tokens = fmt::format("No token comparison: {}\n", e.what());
  }
  write_output(result, dir / "token_deltas.md", tokens);
  mark_stage(config, "report");
  return result;
}

CommandResult cmd_groundtruth(const PipelineConfig& config) {
  if (!config.profiles) throw UsageError("groundtruth.profiles is not set in the config");
  config.validate();
  CommandResult result;
  const auto corpus = load_corpus(config.corpus);
  const auto profiles = ground_truth::load_profiles(*config.profiles);
  const auto trust = ground_truth::derive_trust_weights(profiles);

  std::vector<ground_truth::WeightedLabel> labels;
  for (const auto& rec : corpus) {
    try {
      labels.push_back(ground_truth::weighted_label(rec.id, rec.labels, trust.weight, config.label_threshold));
    } catch (const Error& e) {
      result.fail(e.what());
    }
  }
  write_output(result, config.output_dir / kWeightedLabelsCsv, ground_truth::format_weighted_labels(labels));
  result.notes.push_back(fmt::format("{} records labelled, {} errors", labels.size(), result.errors.size()));
  mark_stage(config, "groundtruth");
  return result;
}

namespace {

struct QualInputs {
  std::string rewrite_data;
  std::string reasoning_data;
  std::vector<qual::SourceDocument> documents;
};

QualInputs qual_inputs(const PipelineConfig& config, const std::vector<SentenceRecord>& corpus) {
  const auto& q = config.qual;
  std::vector<SentenceRecord> selected;
  if (q.scores) {
    auto bands = stratify_by_agreement(corpus, load_scores(*q.scores), q.records_per_set);
    for (auto* band : {&bands.highest, &bands.median, &bands.lowest}) {
      selected.insert(selected.end(), band->begin(), band->end());
    }
  } else {
    selected.assign(corpus.begin(), corpus.begin() + std::min(q.records_per_set, corpus.size()));
  }
  std::set<std::string> wanted;
  for (const auto& r : selected) wanted.insert(r.id);

  std::vector<RewritePair> pairs;
  if (auto path = config.output_dir / kRewritesCsv; fs::exists(path)) pairs = parse_rewrites_csv(read_text_file(path));
  std::set<std::string> all_models;
  for (const auto& p : pairs) all_models.insert(p.model_id);
  std::vector<std::string> models(all_models.begin(), all_models.end());
  if (models.size() > q.deep_read_sets) models.resize(q.deep_read_sets);

  QualInputs in;
  std::map<std::pair<std::string, std::string>, const RewritePair*> pair_of;
  for (const auto& p : pairs) pair_of[{p.model_id, p.record_id}] = &p;
  std::size_t set_no = 0;
  for (const auto& m : models) {
    in.rewrite_data += fmt::format("## Set {}: {}\n\n", ++set_no, m);
    for (const auto& rec : selected) {
      auto it = pair_of.find({m, rec.id});
      if (it == pair_of.end()) continue;
      in.rewrite_data += fmt::format("[{}]\nOriginal: {}\nAutistic rewrite: {}\nNeurotypical rewrite: {}\n\n", rec.id,
                                     rec.target, it->second->raw_aut, it->second->raw_nt);
    }
  }

  // Reasoning excerpts: CoT responses when present, else annotator justifications.
  if (auto path = config.output_dir / kResponsesCsv; fs::exists(path)) {
    auto t = csv::parse(read_text_file(path));
    auto rid = t.column("record-id"), mid = t.column("model-id"), cond = t.column("condition"),
         resp = t.column("response");
    if (rid && mid && cond && resp) {
      for (const auto& row : t.rows) {
        if (row[*cond] != to_string(Condition::CoT) || !wanted.count(row[*rid])) continue;
        in.documents.push_back({row[*mid] + "/" + row[*rid], row[*resp]});
      }
    }
  }
  if (in.documents.empty()) {
    for (const auto& rec : selected) {
      for (const auto& [annotator, text] : rec.justifications) {
        if (!text.empty()) in.documents.push_back({rec.id + "/" + annotator, text});
      }
    }
  }
  for (const auto& d : in.documents) in.reasoning_data += fmt::format("[{}]\n{}\n\n", d.id, d.text);
  if (in.documents.size() > q.deductive_documents) in.documents.resize(q.deductive_documents);
  return in;
}

}  // namespace

CommandResult cmd_qual(const PipelineConfig& config) {
  config.validate();
  const auto& q = config.qual;
  if (q.inductive_coders.empty() && q.deductive_coders.empty()) throw UsageError("qual: no coders configured");
  if (!q.synthesizer) throw UsageError("qual.synthesizer is not set");
  for (const auto* coders : {&q.inductive_coders, &q.deductive_coders}) {
    if (coders->size() == 1) throw UsageError("qual: a protocol needs at least 2 coders");
  }
  CommandResult result;
  const auto corpus = load_corpus(config.corpus);
  const auto templates = config.templates();
  auto inputs = qual_inputs(config, corpus);

  qual::QualOptions opts;
  opts.structured_footer = q.structured_footer;
  opts.gateway.cache_dir = config.effective_cache_dir();
  opts.gateway.concurrency = config.concurrency;
  opts.gateway.backoff_base = config.backoff_base;
  qual::GatewayPool pool(opts.gateway);

  std::vector<qual::AnalysisDocument> docs;
  std::vector<qual::ThemeCode> codes;
  if (!q.inductive_coders.empty()) {
    if (inputs.rewrite_data.empty()) throw UsageError("qual: no rewrite outputs to analyse; run `probe rewrite` first");
    if (inputs.reasoning_data.empty()) throw UsageError("qual: no reasoning excerpts (CoT responses or justifications)");
    qual::InductiveProtocol inductive(q.inductive_coders, *q.synthesizer, pool, opts, templates);
    inductive.run(inputs.rewrite_data, inputs.reasoning_data);
    auto d = inductive.store().documents();
    docs.insert(docs.end(), d.begin(), d.end());
  }
  if (!q.deductive_coders.empty()) {
    if (inputs.documents.empty()) throw UsageError("qual: no documents for deductive coding");
    qual::DeductiveProtocol deductive(q.deductive_coders, *q.synthesizer, pool, opts, templates);
    deductive.run(inputs.documents);
    auto d = deductive.store().documents();
    docs.insert(docs.end(), d.begin(), d.end());
    codes = deductive.theme_codes();
  }
  pool.flush();

  const auto dir = config.output_dir / kQualDir;
  qual::write_documents(dir, docs);
  for (const auto& d : docs) result.outputs.push_back(dir / (d.file_stem() + ".md"));
  write_output(result, dir / "theme_codes.csv", qual::format_theme_codes_csv(codes));
  result.notes.push_back(fmt::format("{} documents, {} theme codes", docs.size(), codes.size()));
  mark_stage(config, "qual");
  return result;
}

CommandResult cmd_ingest(const IngestOptions& options) {
  CommandResult result;
  const auto records = load_corpus(options.input);
  const auto hash = corpus_hash(records);
  result.notes.push_back(fmt::format("{} records, corpus hash {}", records.size(), hash));
  if (!options.output.empty()) {
    save_corpus(options.output, records, corpus_format_for(options.output));
    result.outputs.push_back(options.output);
  }
  if (options.scores) {
    const auto scores = load_scores(*options.scores);
    auto bands = stratify_by_agreement(records, scores, options.band_size);
    std::string out;
    csv::append_row(out, std::vector<std::string>{"band", "id", "agreement"});
    auto emit = [&](const char* band, const std::vector<SentenceRecord>& rs) {
      for (const auto& r : rs) csv::append_row(out, std::vector<std::string>{band, r.id, fmt::format("{}", scores.at(r.id))});
    };
    emit("highest", bands.highest);
    emit("median", bands.median);
    emit("lowest", bands.lowest);
    auto dir = options.output.empty() ? fs::path(".") : options.output.parent_path();
    write_output(result, dir / "bands.csv", out);
  }
  return result;
}

}  // namespace probe

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "probe/error.hpp"
#include "probe/pipeline.hpp"

namespace {

// 0 success, 1 record-level errors, 2 bad invocation or config, 3 other failure.
constexpr int kExitUsage = 2;
constexpr int kExitFailure = 3;

struct Common {
  std::string config;
  std::vector<std::string> models;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool config_required = true) {
  auto* opt = sub->add_option("--config", c.config, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  if (config_required) opt->required();
  sub->add_option("--model", c.models, "Restrict to these model ids (repeatable)");
  sub->add_option("--seed", c.seed, "Override the config seed");
  sub->add_option("--out", c.out, "Override the output directory");
}

probe::PipelineConfig load_config(const Common& c) {
  auto cfg = probe::PipelineConfig::load(c.config);
  cfg.restrict_models(c.models);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

bool quiet = false;

int report(const probe::CommandResult& r) {
  if (!quiet) {
    for (const auto& n : r.notes) std::cout << n << "\n";
    for (const auto& p : r.outputs) std::cout << "wrote " << p.string() << "\n";
  }
  if (!r.errors.empty()) {
    std::cerr << r.errors.size() << " error(s):\n";
    for (const auto& e : r.errors) std::cerr << "  " << e << "\n";
  }
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Paired persona-rewrite evaluation harness"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  Common common;
  auto* rewrite = app.add_subcommand("rewrite", "Generate persona rewrites and classify compliance");
  auto* score = app.add_subcommand("score", "Filter non-compliant pairs and compute metrics.csv");
  auto* stats = app.add_subcommand("stats", "Paired tests per metric: stats.csv and table1.md");
  auto* report_cmd = app.add_subcommand("report", "Charts, failure-mode, collapse and token tables");
  auto* groundtruth = app.add_subcommand("groundtruth", "Trust-weighted labels from annotator profiles");
  auto* qual = app.add_subcommand("qual", "Run the inductive and deductive agent protocols");
  auto* ingest = app.add_subcommand("ingest", "Validate and convert a corpus; optional agreement bands");
  for (auto* sub : {rewrite, score, stats, report_cmd, groundtruth, qual}) add_common(sub, common);

  std::string profiles;
  std::optional<double> threshold;
  groundtruth->add_option("--profiles", profiles, "Annotator profiles CSV (overrides config)")
      ->check(CLI::ExistingFile);
  groundtruth->add_option("--threshold", threshold, "Hard-label threshold")->check(CLI::Range(0.0, 1.0));

  probe::IngestOptions ingest_opts;
  std::string ingest_in, ingest_out, ingest_scores;
  add_common(ingest, common, false);
  ingest->add_option("--in", ingest_in, "Corpus to read (defaults to the config corpus)")->check(CLI::ExistingFile);
  ingest->add_option("--convert", ingest_out, "Write the corpus here (.csv or .jsonl)");
  ingest->add_option("--scores", ingest_scores, "Agreement scores CSV (id, agreement)")->check(CLI::ExistingFile);
  ingest->add_option("--band-size", ingest_opts.band_size, "Records per agreement band");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; every other parse failure is a usage error.
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (rewrite->parsed()) return report(probe::cmd_rewrite(load_config(common)));
    if (score->parsed()) return report(probe::cmd_score(load_config(common)));
    if (stats->parsed()) return report(probe::cmd_stats(load_config(common)));
    if (report_cmd->parsed()) return report(probe::cmd_report(load_config(common)));
    if (groundtruth->parsed()) {
      auto cfg = load_config(common);
      if (!profiles.empty()) cfg.profiles = profiles;
      if (threshold) cfg.label_threshold = *threshold;
      return report(probe::cmd_groundtruth(cfg));
    }
    if (qual->parsed()) return report(probe::cmd_qual(load_config(common)));
    if (ingest->parsed()) {
      if (!ingest_in.empty()) {
        ingest_opts.input = ingest_in;
      } else if (!common.config.empty()) {
        ingest_opts.input = load_config(common).corpus;
      } else {
        std::cerr << "ingest: give --in or --config\n";
        return kExitUsage;
      }
      ingest_opts.output = ingest_out;
      if (!ingest_scores.empty()) ingest_opts.scores = ingest_scores;
      return report(probe::cmd_ingest(ingest_opts));
    }
  } catch (const probe::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const probe::ValidationError& e) {
    std::cerr << "invalid config or input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const probe::SchemaError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

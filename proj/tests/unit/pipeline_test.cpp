#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "probe/compliance.hpp"
#include "probe/csv.hpp"
#include "probe/error.hpp"
#include "probe/pipeline.hpp"
#include "probe_stub/stubs.hpp"
#include "workspace.hpp"

using namespace probe;
using testing_support::TempDir;
using testing_support::WorkspaceSpec;
using testing_support::write_workspace;

namespace {
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_rows(const std::filesystem::path& p) {
  auto s = slurp(p);
  return csv::parse(s).rows.size();
}
}  // namespace

TEST(Pipeline, TenRecordsOneModelGivesTwentyOutputs) {
  TempDir tmp;
  stub::ChatStub chat;
  stub::ScorerStub scorer;
  auto cfg = PipelineConfig::load(write_workspace(tmp.path(), {chat.endpoint(), scorer.base_url()}));
  auto r = cmd_rewrite(cfg);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(data_rows(cfg.output_dir / kResponsesCsv), 20u);
  auto pairs = parse_rewrites_csv(slurp(cfg.output_dir / kRewritesCsv));
  ASSERT_EQ(pairs.size(), 10u);
  for (const auto& p : pairs) {
    EXPECT_FALSE(p.raw_aut.empty());
    EXPECT_FALSE(p.raw_nt.empty());
  }
  EXPECT_EQ(chat.requests(), 20u);
  EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "manifest.json"));
}

TEST(Pipeline, WarmCacheMakesNoNetworkCalls) {
  TempDir tmp;
  stub::ChatStub chat;
  stub::ScorerStub scorer;
  auto cfg = PipelineConfig::load(write_workspace(tmp.path(), {chat.endpoint(), scorer.base_url()}));
  cmd_rewrite(cfg);
  auto first = slurp(cfg.output_dir / kRewritesCsv);
  auto calls = chat.requests();
  cmd_rewrite(cfg);
  EXPECT_EQ(chat.requests(), calls);
  EXPECT_EQ(slurp(cfg.output_dir / kRewritesCsv), first);
}

TEST(Pipeline, UnreachableModelIsReportedByName) {
  TempDir tmp;
  stub::ScorerStub scorer;
  WorkspaceSpec spec{"http://127.0.0.1:1/api/chat", scorer.base_url(), 3, {"ghost-model"}};
  auto cfg = PipelineConfig::load(write_workspace(tmp.path(), spec));
  auto r = cmd_rewrite(cfg);
  EXPECT_EQ(r.exit_code, 1);
  ASSERT_FALSE(r.errors.empty());
  EXPECT_NE(r.errors.front().find("ghost-model"), std::string::npos) << r.errors.front();
  EXPECT_EQ(data_rows(cfg.output_dir / kErrorsCsv), 6u);
}

TEST(Pipeline, ScoreWithoutRewritesIsUsageError) {
  TempDir tmp;
  stub::ChatStub chat;
  stub::ScorerStub scorer;
  auto cfg = PipelineConfig::load(write_workspace(tmp.path(), {chat.endpoint(), scorer.base_url()}));
  try {
    cmd_score(cfg);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("probe rewrite"), std::string::npos);
  }
}

TEST(Pipeline, FullChainProducesTableAndCharts) {
  TempDir tmp;
  stub::ChatStub chat;
  stub::ScorerStub scorer;
  WorkspaceSpec spec{chat.endpoint(), scorer.base_url(), 20, {"stub-a", "stub/b"}};
  auto cfg = PipelineConfig::load(write_workspace(tmp.path(), spec));
  EXPECT_EQ(cmd_rewrite(cfg).exit_code, 0);
  EXPECT_EQ(cmd_score(cfg).exit_code, 0);
  EXPECT_EQ(cmd_stats(cfg).exit_code, 0);
  EXPECT_EQ(cmd_report(cfg).exit_code, 0);
  auto table = slurp(cfg.output_dir / kTable1Md);
  for (const char* col : {"Metric", "p-value", "CI", "| r"}) EXPECT_NE(table.find(col), std::string::npos) << col;
  for (const auto& m : stats::metric_names()) {
    EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / kReportDir / (m + "_delta.svg"))) << m;
  }
  auto ex = slurp(cfg.output_dir / kExclusionsCsv);
  EXPECT_NE(ex.find("valid"), std::string::npos);
}

TEST(Groundtruth, WritesOneLabelPerRecord) {
  TempDir tmp;
  stub::ChatStub chat;
  stub::ScorerStub scorer;
  auto cfg = PipelineConfig::load(write_workspace(tmp.path(), {chat.endpoint(), scorer.base_url(), 6}));
  auto r = cmd_groundtruth(cfg);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(data_rows(cfg.output_dir / kWeightedLabelsCsv), 6u);
}

TEST(Config, EnvOverridesAndModelRestriction) {
  TempDir tmp;
  auto path = write_workspace(tmp.path(), {"http://127.0.0.1:9/api/chat", "http://127.0.0.1:8090", 2,
                                           {"stub-a", "stub-b"}});
  testing_support::EnvGuard g1("PROBE_SCORER_URL", "http://127.0.0.1:7000");
  testing_support::EnvGuard g2("PROBE_CACHE_DIR", (tmp.path() / "c").string());
  auto cfg = PipelineConfig::load(path);
  EXPECT_EQ(cfg.scorer_url, "http://127.0.0.1:7000");
  EXPECT_EQ(cfg.effective_cache_dir(), tmp.path() / "c");
  EXPECT_EQ(cfg.corpus, tmp.path() / "corpus.csv");
  cfg.restrict_models({"stub-b"});
  ASSERT_EQ(cfg.models.size(), 1u);
  EXPECT_THROW(cfg.restrict_models({"nope"}), UsageError);
  auto eff = cfg.effective_conditions();
  EXPECT_EQ(eff.size(), 2u);
}

TEST(Config, HashIgnoresPathsButNotSettings) {
  TempDir a, b;
  auto ca = PipelineConfig::load(write_workspace(a.path(), {"http://x/api/chat", "http://127.0.0.1:8090"}));
  auto cb = PipelineConfig::load(write_workspace(b.path(), {"http://y/api/chat", "http://127.0.0.1:8091"}));
  EXPECT_EQ(ca.config_hash(), cb.config_hash());
  cb.seed = 99;
  EXPECT_NE(ca.config_hash(), cb.config_hash());
}

TEST(Config, BadJsonIsValidationError) {
  TempDir tmp;
  std::ofstream(tmp.path() / "c.json") << "{ not json";
  EXPECT_THROW(PipelineConfig::load(tmp.path() / "c.json"), ValidationError);
}

TEST(Ingest, ConvertsAndWritesBands) {
  TempDir tmp;
  auto corpus = testing_support::synthetic_corpus(30);
  save_corpus(tmp.path() / "in.csv", corpus, CorpusFormat::Csv);
  {
    std::ofstream s(tmp.path() / "scores.csv");
    s << "id,agreement\n";
    for (std::size_t i = 0; i < corpus.size(); ++i) s << corpus[i].id << "," << (static_cast<double>(i) / 30.0) << "\n";
  }
  IngestOptions o{tmp.path() / "in.csv", tmp.path() / "out.jsonl", tmp.path() / "scores.csv", 5};
  auto r = cmd_ingest(o);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(load_corpus(tmp.path() / "out.jsonl"), corpus);
  EXPECT_TRUE(std::filesystem::exists(tmp.path() / "bands.csv"));
}

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "probe/corpus.hpp"
#include "probe/csv.hpp"
#include "probe/digest.hpp"
#include "probe/error.hpp"
#include "probe/io.hpp"
#include "probe/manifest.hpp"

using namespace probe;
using testing_support::TempDir;

TEST(Csv, QuotedFieldsRoundTrip) {
  csv::Table t{{"a", "b"}, {{"x,y", "he said \"hi\""}, {"line\nbreak", ""}}};
  auto parsed = csv::parse(csv::format(t));
  EXPECT_EQ(parsed.header, t.header);
  EXPECT_EQ(parsed.rows, t.rows);
}

TEST(Csv, LongRowIsSchemaError) { EXPECT_THROW(csv::parse("a,b\n1,2,3\n"), SchemaError); }

TEST(Corpus, CsvWithContextLabelsAndJustifications) {
  auto recs = parse_corpus(
      "id,preceding,target,following,ann1,ann2,justification:ann1,agreement\n"
      "s1,Before.,The target.,,1,0,because,0.5\n"
      "s2,,Another one.,After.,0,,,0.2\n",
      CorpusFormat::Csv);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].preceding, "Before.");
  EXPECT_FALSE(recs[0].following);
  EXPECT_EQ(recs[0].labels.at("ann1"), 1);
  EXPECT_EQ(recs[0].labels.at("ann2"), 0);
  EXPECT_EQ(recs[0].justifications.at("ann1"), "because");
  EXPECT_FALSE(recs[1].preceding);
  EXPECT_EQ(recs[1].labels.count("ann2"), 0u);
  EXPECT_EQ(recs[1].labels.count("agreement"), 0u);
}

TEST(Corpus, HeaderOnlyIsEmpty) {
  EXPECT_TRUE(parse_corpus("id,preceding,target,following\n", CorpusFormat::Csv).empty());
  EXPECT_TRUE(parse_corpus("", CorpusFormat::Jsonl).empty());
}

TEST(Corpus, DuplicateIdNamesTheId) {
  try {
    parse_corpus("id,target\nx1,a\nx1,b\n", CorpusFormat::Csv);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("x1"), std::string::npos);
  }
}

TEST(Corpus, MissingTargetColumnIsSchemaError) {
  try {
    parse_corpus("id,text\n1,a\n", CorpusFormat::Csv);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "target");
  }
}

TEST(Corpus, NonBinaryLabelRejected) {
  EXPECT_THROW(parse_corpus("id,target,a1\nx,t,2\n", CorpusFormat::Csv), ValidationError);
}

TEST(Corpus, JsonlRoundTripPreservesHash) {
  auto recs = testing_support::synthetic_corpus(25);
  recs[3].justifications["a2"] = "quoted \"text\", with comma";
  for (auto fmt : {CorpusFormat::Csv, CorpusFormat::Jsonl}) {
    auto back = parse_corpus(serialize_corpus(recs, fmt), fmt);
    EXPECT_EQ(back, recs);
    EXPECT_EQ(corpus_hash(back), corpus_hash(recs));
  }
}

TEST(Corpus, HashChangesWithAnyField) {
  auto recs = testing_support::synthetic_corpus(5);
  auto h = corpus_hash(recs);
  recs[2].labels["a1"] ^= 1;
  EXPECT_NE(corpus_hash(recs), h);
}

TEST(Corpus, FormatFromExtension) {
  EXPECT_EQ(corpus_format_for("x/y.csv"), CorpusFormat::Csv);
  EXPECT_EQ(corpus_format_for("y.JSONL"), CorpusFormat::Jsonl);
  EXPECT_EQ(corpus_format_for("y.ndjson"), CorpusFormat::Jsonl);
  EXPECT_THROW(corpus_format_for("y.txt"), UsageError);
}

TEST(Corpus, LoadFromDisk) {
  TempDir dir;
  auto recs = testing_support::synthetic_corpus(8);
  save_corpus(dir / "c.jsonl", recs, CorpusFormat::Jsonl);
  EXPECT_EQ(load_corpus(dir / "c.jsonl"), recs);
}

TEST(Kappa, PerfectAgreement) {
  std::vector<int> a{1, 0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(pairwise_kappa(a, a), 1.0);
}

namespace {
// Expands a 2x2 contingency table (rows: rater A, cols: rater B; class 1 first).
std::pair<std::vector<int>, std::vector<int>> from_counts(int a, int b, int c, int d) {
  std::vector<int> x, y;
  auto add = [&](int n, int u, int v) {
    for (int i = 0; i < n; ++i) x.push_back(u), y.push_back(v);
  };
  add(a, 1, 1);
  add(b, 1, 0);
  add(c, 0, 1);
  add(d, 0, 0);
  return {x, y};
}
}  // namespace

TEST(Kappa, HandContingency) {
  auto [x, y] = from_counts(20, 5, 10, 15);
  EXPECT_NEAR(pairwise_kappa(x, y), 0.4, 1e-9);
  EXPECT_NEAR(pairwise_kappa(x, y), oracle::kappa_2x2(20, 5, 10, 15), 1e-12);
}

TEST(Kappa, IndependentLookingIsZero) {
  auto [x, y] = from_counts(10, 10, 10, 10);
  EXPECT_NEAR(pairwise_kappa(x, y), 0.0, 1e-12);
}

TEST(Kappa, ConstantRatersAreDegenerate) {
  std::vector<int> a{1, 1, 1};
  EXPECT_THROW(pairwise_kappa(a, a), DegenerateError);
}

TEST(Kappa, MatchesOracleOnRandomTables) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> cell(1, 30);
  for (int k = 0; k < 50; ++k) {
    int a = cell(rng), b = cell(rng), c = cell(rng), d = cell(rng);
    auto [x, y] = from_counts(a, b, c, d);
    EXPECT_NEAR(pairwise_kappa(x, y), oracle::kappa_2x2(a, b, c, d), 1e-12);
  }
}

TEST(Stratify, ExactPartitionOfFifteen) {
  auto recs = testing_support::synthetic_corpus(15);
  std::map<std::string, double> scores;
  for (std::size_t i = 0; i < recs.size(); ++i) scores[recs[i].id] = static_cast<double>(i) / 14.0;
  auto bands = stratify_by_agreement(recs, scores, 5);
  std::set<std::string> ids;
  for (const auto* band : {&bands.highest, &bands.median, &bands.lowest}) {
    EXPECT_EQ(band->size(), 5u);
    for (const auto& r : *band) ids.insert(r.id);
  }
  EXPECT_EQ(ids.size(), 15u);
  EXPECT_EQ(bands.highest.front().id, "r014");
  EXPECT_EQ(bands.lowest.back().id, "r000");
}

TEST(Stratify, EqualScoresOrderById) {
  auto recs = testing_support::synthetic_corpus(15);
  std::map<std::string, double> scores;
  for (const auto& r : recs) scores[r.id] = 0.5;
  auto bands = stratify_by_agreement(recs, scores, 5);
  EXPECT_EQ(bands.highest.front().id, "r000");
  EXPECT_EQ(bands.median.front().id, "r005");
  EXPECT_EQ(bands.lowest.front().id, "r010");
}

TEST(Stratify, BandBoundariesAtPublishedLevels) {
  // Five records at each agreement level; bands must split at the levels.
  auto recs = testing_support::synthetic_corpus(15);
  std::map<std::string, double> scores;
  const double levels[] = {0.818, 0.636, 0.455};
  for (std::size_t i = 0; i < 15; ++i) scores[recs[i].id] = levels[i % 3];
  auto bands = stratify_by_agreement(recs, scores, 5);
  for (const auto& r : bands.highest) EXPECT_EQ(scores[r.id], 0.818);
  for (const auto& r : bands.median) EXPECT_EQ(scores[r.id], 0.636);
  for (const auto& r : bands.lowest) EXPECT_EQ(scores[r.id], 0.455);
}

TEST(Stratify, TooFewRecords) {
  auto recs = testing_support::synthetic_corpus(10);
  std::map<std::string, double> scores;
  for (const auto& r : recs) scores[r.id] = 1;
  EXPECT_THROW(stratify_by_agreement(recs, scores, 4), UsageError);
}

TEST(Digest, KnownVectorAndCanonicalOrder) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  auto a = nlohmann::json::parse(R"({"b":1,"a":[1,2]})");
  auto b = nlohmann::json::parse(R"({"a":[1,2],"b":1})");
  EXPECT_EQ(digest_json(a), digest_json(b));
}

TEST(Manifest, RunIdIsStableAndRoundTrips) {
  auto id = derive_run_id("c", "k", "m", Condition::RewriteNt);
  EXPECT_EQ(id.size(), 16u);
  EXPECT_EQ(id, derive_run_id("c", "k", "m", Condition::RewriteNt));
  EXPECT_NE(id, derive_run_id("c", "k", "m", Condition::RewriteAutistic));

  TempDir dir;
  PipelineManifest m;
  m.run_id = "abc";
  m.seed = 42;
  m.runs.push_back({id, "c", "k", "m", Condition::RewriteNt, "2024-01-01T00:00:00Z", {{"temperature", 0}}});
  m.stages["rewrite"] = "t";
  m.write(dir.path());
  auto back = PipelineManifest::read(dir.path());
  EXPECT_EQ(back.to_json(), m.to_json());
}

TEST(Io, TimestampHonorsSourceDateEpoch) {
  testing_support::EnvGuard g("SOURCE_DATE_EPOCH", "0");
  EXPECT_EQ(utc_timestamp(), "1970-01-01T00:00:00Z");
}

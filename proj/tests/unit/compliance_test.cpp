#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "probe/compliance.hpp"
#include "probe/error.hpp"
#include "probe/tokenize.hpp"

using namespace probe;

TEST(Extract, HeaderPrefixAndPlaceholder) {
  EXPECT_EQ(extract_content("Rewritten Sentence: The meeting drained me."), "The meeting drained me.");
  EXPECT_EQ(extract_content("Rewritten Sentence:"), "");
  EXPECT_EQ(extract_content("The meeting drained me, honestly."), "The meeting drained me, honestly.");
}

TEST(Extract, FencesQuotesAndTrailingReasoning) {
  EXPECT_EQ(extract_content("Here is the rewrite:\n\n\"I left early.\"\n\nReasoning: shorter."), "I left early.");
  EXPECT_EQ(extract_content("```\nI left early.\n```"), "I left early.");
  EXPECT_EQ(extract_content("**Rewritten sentence:** I left early."), "I left early.");
}

TEST(Extract, LongPrefixBeforeColonIsContent) {
  const std::string s = "My plan for the whole long weekend was simple: sleep.";
  EXPECT_EQ(extract_content(s), s);
}

TEST(Extract, IdempotentOnGeneratedOutputs) {
  const char* parts[] = {"Rewritten Sentence:", "Here's the rewrite:", "\"", "```", "\n", "\n\n", "Reasoning: x.",
                         "I left early.", "Okay, so", "Step 1:", "the meeting ran long", "**", "Answer: ", " "};
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(parts) - 1), len(0, 8);
  for (int i = 0; i < 2000; ++i) {
    std::string raw;
    for (auto k = len(rng); k > 0; --k) raw += parts[pick(rng)];
    auto once = extract_content(raw);
    EXPECT_EQ(extract_content(once), once) << "raw=[" << raw << "]";
  }
}

TEST(Classify, TableExamples) {
  const std::string src = "I never really talk about it because people say that it is weird.";
  EXPECT_EQ(classify("Rewritten Sentence:", src).cls, ComplianceClass::Erasure);
  EXPECT_EQ(classify("I'm sorry, I cannot help with that.", src).cls, ComplianceClass::Refusal);
  auto ok = classify("I don't really talk about it since people think it is weird.", src);
  EXPECT_EQ(ok.cls, ComplianceClass::Compliant);
  EXPECT_TRUE(ok.matched_rules.empty());
}

TEST(Classify, MatchedRulesRecordEveryHit) {
  auto v = classify("I cannot.", "Some long source sentence about the meeting.");
  EXPECT_EQ(v.cls, ComplianceClass::Refusal);
  EXPECT_EQ(v.matched_rules, (std::vector<std::string>{"refusal", "erasure"}));
}

TEST(Classify, ErasureImpliesShortExtraction) {
  std::mt19937_64 rng(9);
  const char* words[] = {"Rewritten", "Sentence:", "ok", "\n", "Here's", "it", "the", "meeting", "\"", "I", "left"};
  std::uniform_int_distribution<std::size_t> pick(0, std::size(words) - 1), len(0, 6);
  for (int i = 0; i < 1000; ++i) {
    std::string raw;
    for (auto k = len(rng); k > 0; --k) raw += std::string(words[pick(rng)]) + " ";
    auto v = classify(raw, "the meeting ran long");
    if (v.cls == ComplianceClass::Erasure) {
      EXPECT_LT(tokenize(v.extracted).size(), 3u) << raw;
    }
  }
}

TEST(Classify, AppendingRefusalTextKeepsRefusal) {
  const std::string src = "The meeting ran long and everyone was exhausted.";
  for (const char* raw : {"", "Rewritten Sentence:", "The meeting ran long.", "Here's step one. Reasoning: x y z",
                          "Purple elephants dance on frozen lakes tonight."}) {
    for (const char* tail : {" I'm sorry.", "\nI cannot do that.", " unable to assist"}) {
      EXPECT_EQ(classify(std::string(raw) + tail, src).cls, ComplianceClass::Refusal) << raw << tail;
    }
  }
}

TEST(Classify, RefusalNeedsWordBoundary) {
  EXPECT_NE(classify("Hi cannot-be-stopped spirit: i cannotice this.", "x y z w").cls, ComplianceClass::Refusal);
}

TEST(Classify, GoldenFile) {
  std::ifstream f(std::string(PROBE_TEST_DATA_DIR) + "/compliance_golden.jsonl");
  ASSERT_TRUE(f);
  int n = 0;
  std::map<std::string, int> per_class;
  for (std::string line; std::getline(f, line);) {
    auto j = nlohmann::json::parse(line);
    auto raw = j["raw"].get<std::string>(), src = j["source"].get<std::string>();
    auto v = classify(raw, src);
    EXPECT_EQ(to_string(v.cls), j["expected"].get<std::string>()) << j["id"];
    EXPECT_EQ(classify(raw, src), v) << "non-deterministic " << j["id"];
    ++n;
    ++per_class[j["expected"].get<std::string>()];
  }
  EXPECT_EQ(n, 50);
  EXPECT_EQ(per_class.size(), 5u);
}

TEST(RuleConfig, JsonRoundTripAndValidation) {
  RuleConfig r;
  r.erasure_threshold = 4;
  r.refusal_lexicon.push_back("as an ai");
  auto back = RuleConfig::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
  r.meta_jaccard_max = 1.5;
  EXPECT_THROW(r.validate(), ValidationError);
  RuleConfig e;
  e.header_lexicon.push_back("");
  EXPECT_THROW(e.validate(), ValidationError);
}

TEST(RuleConfig, CustomThresholdChangesVerdict) {
  RuleConfig r;
  r.erasure_threshold = 6;
  EXPECT_EQ(classify("I left quite early.", "I left early.", r).cls, ComplianceClass::Erasure);
  EXPECT_EQ(classify("I left quite early.", "I left early.").cls, ComplianceClass::Compliant);
}

namespace {
RewritePair pair_with(ComplianceClass a, ComplianceClass n, std::string id = "r") {
  RewritePair p;
  p.record_id = std::move(id);
  p.model_id = "m";
  p.verdict_aut.cls = a;
  p.verdict_nt.cls = n;
  return p;
}
}  // namespace

TEST(Exclusion, AllCompliantAndAllErasure) {
  std::vector<RewritePair> ok(10, pair_with(ComplianceClass::Compliant, ComplianceClass::Compliant));
  auto r = exclusion_filter(ok);
  EXPECT_EQ(r.valid.size(), 10u);
  EXPECT_TRUE(r.excluded.empty());
  std::vector<RewritePair> bad(10, pair_with(ComplianceClass::Erasure, ComplianceClass::Erasure));
  auto e = exclusion_filter(bad);
  EXPECT_TRUE(e.valid.empty());
  EXPECT_EQ(e.side_counts[ComplianceClass::Erasure], 20u);
  EXPECT_EQ(e.pair_counts[ComplianceClass::Erasure], 10u);
}

TEST(Exclusion, PairClassIsAutisticSideFirst) {
  auto r = exclusion_filter({pair_with(ComplianceClass::Refusal, ComplianceClass::Erasure),
                             pair_with(ComplianceClass::Compliant, ComplianceClass::MetaCommentary)});
  EXPECT_EQ(r.pair_counts[ComplianceClass::Refusal], 1u);
  EXPECT_EQ(r.pair_counts[ComplianceClass::MetaCommentary], 1u);
  EXPECT_EQ(r.pair_counts[ComplianceClass::Erasure], 0u);
  EXPECT_EQ(r.side_counts[ComplianceClass::Erasure], 1u);
  auto csv = format_exclusions_csv(r);
  EXPECT_NE(csv.find("total-excluded,,2"), std::string::npos);
  EXPECT_NE(csv.find("valid,,0"), std::string::npos);
}

TEST(RewritesCsv, RoundTrip) {
  const std::string src = "The meeting ran long and everyone was exhausted.";
  RewritePair p;
  p.record_id = "r1";
  p.model_id = "org/m";
  p.raw_aut = "Rewritten Sentence:";
  p.raw_nt = "Here is the rewrite:\n\n\"The meeting, well, it ran long.\"";
  p.verdict_aut = classify(p.raw_aut, src);
  p.verdict_nt = classify(p.raw_nt, src);
  auto back = parse_rewrites_csv(format_rewrites_csv({p}));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].raw_nt, p.raw_nt);
  EXPECT_EQ(back[0].verdict_aut, p.verdict_aut);
  EXPECT_EQ(back[0].verdict_nt, p.verdict_nt);
}

TEST(TokenDelta, IdentityGivesZeros) {
  std::vector<std::string> a{"the cat sat", "on the mat"};
  for (const auto& d : token_frequency_delta(a, a, 10)) EXPECT_EQ(d.delta, 0.0);
}

TEST(TokenDelta, ForcedByFormula) {
  // 100 occurrences per 10k tokens in a, none in b.
  std::vector<std::string> a, b;
  std::string big;
  for (int i = 0; i < 10000; ++i) big += i % 100 == 0 ? "rewritten " : "word ";
  a.push_back(big);
  b.push_back("word word word");
  auto d = token_frequency_delta(a, b, 5);
  ASSERT_FALSE(d.empty());
  EXPECT_EQ(d[0].token, "rewritten");
  EXPECT_NEAR(d[0].delta, 100.0, 1e-9);
  EXPECT_EQ(d[0].count_a, 100u);
}

TEST(TokenDelta, MetaTokensLeadOnSeededFixture) {
  std::vector<std::string> aut, nt;
  for (int i = 0; i < 40; ++i) {
    aut.push_back("Here's the rewritten sentence: I left the meeting early. Reasoning: it is direct.");
    nt.push_back("I just left the meeting a bit early, you know.");
  }
  auto d = token_frequency_delta(aut, nt, 6);
  std::set<std::string> top;
  for (const auto& t : d) top.insert(t.token);
  for (const char* t : {"rewritten", "reasoning"}) EXPECT_TRUE(top.count(t)) << t;
}

TEST(TokenDelta, EmptyCorpusIsUsageError) {
  EXPECT_THROW(token_frequency_delta({}, {"a"}, 3), UsageError);
  EXPECT_THROW(token_frequency_delta({"a"}, {"  "}, 3), UsageError);
}

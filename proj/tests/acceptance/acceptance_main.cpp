// One line per acceptance criterion. Exit status is nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "probe/compliance.hpp"
#include "probe/corpus.hpp"
#include "probe/error.hpp"
#include "probe/ground_truth.hpp"
#include "probe/pipeline.hpp"
#include "probe/prompt.hpp"
#include "probe/qual.hpp"
#include "probe/stats.hpp"
#include "probe/text_metrics.hpp"
#include "probe/tokenize.hpp"
#include "probe_stub/stubs.hpp"
#include "workspace.hpp"

using namespace probe;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kRougeBudgetS = 5;
constexpr double kWilcoxonTol = 1e-12;
constexpr double kWilcoxonBudgetS = 30;
constexpr double kNormalTol = 1e-3;
constexpr double kNormalRegionP = 0.1;
constexpr double kCoverageLow = 0.93, kCoverageHigh = 0.97;
constexpr double kBootstrapBudgetS = 120;
constexpr double kRankBiserialTol = 1e-9;
constexpr double kTeamMeanTol = 1e-12;
constexpr double kLabelTol = 1e-9;
constexpr double kKappaTol = 1e-9;
constexpr std::size_t kExclusionTotal = 14'840, kExclusionValid = 13'274;
constexpr double kEndToEndBudgetS = 60;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome fail(std::string why) { return {false, std::move(why)}; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> contents for every file under `root`, skipping `skip_dir`.
std::map<std::string, std::string> snapshot(const fs::path& root, const std::string& skip_dir = "cache") {
  std::map<std::string, std::string> out;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    auto rel = fs::relative(it->path(), root);
    if (it->is_directory() && rel.string() == skip_dir) {
      it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file()) out[rel.generic_string()] = slurp(it->path());
  }
  return out;
}

std::string first_difference(const std::map<std::string, std::string>& a, const std::map<std::string, std::string>& b) {
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it == b.end()) return k + " missing in second run";
    if (it->second != v) return k + " differs";
  }
  for (const auto& [k, v] : b)
    if (!a.count(k)) return k + " missing in first run";
  return {};
}

std::string join_tokens(const std::vector<std::string>& t) {
  std::string s;
  for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
  return s;
}

// Standard normal draws from SplitMix64 via Box-Muller, so trials are
// reproducible across standard libraries.
class Normal {
 public:
  explicit Normal(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (spare_) {
      double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = (static_cast<double>(rng_.next() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(rng_.next() >> 11) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2 * M_PI * u2);
    return r * std::cos(2 * M_PI * u2);
  }

 private:
  stats::SplitMix64 rng_;
  std::optional<double> spare_;
};

Outcome rouge_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(0, 20), word(0, 11);
  auto seq = [&] {
    std::vector<std::string> t(static_cast<std::size_t>(len(rng)));
    for (auto& w : t) w = "w" + std::to_string(word(rng));
    return t;
  };
  std::size_t mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    auto ref = seq(), cand = seq();
    auto r = join_tokens(ref), c = join_tokens(cand);
    if (tokenize(r) != ref || tokenize(c) != cand) return fail("tokenizer changed a generated sequence");
    mismatches += rouge1_f1(r, c) != oracle::rouge1(ref, cand);
    mismatches += rougeL_f1(r, c) != oracle::rougeL(ref, cand);
  }
  return {mismatches == 0, fmt::format("200 pairs, {} mismatches", mismatches)};
}

Outcome wilcoxon_exactness() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> len(1, 12);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> d(static_cast<std::size_t>(len(rng)));
    for (auto& x : d) x = u(rng) + (u(rng) > 0 ? 0.3 : -0.1);
    std::set<double> mags;
    for (double x : d) mags.insert(std::abs(x));
    if (mags.size() != d.size() || mags.count(0.0)) return fail("fixture produced a tie or zero");
    auto w = stats::wilcoxon_signed_rank(d);
    if (w.method != stats::Method::Exact) return fail("exact method not selected");
    auto ranks = oracle::average_abs_ranks(d);
    double wp = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d[i] > 0) wp += ranks[i];
    worst = std::max(worst, std::abs(w.p_value - oracle::signed_rank_p_enumerate(ranks, wp)));
  }
  bool symmetric_ok = true;
  for (std::vector<double> d : {std::vector<double>{1, -1}, {0.5, -0.5, 2, -2}, {1, -1, 2, -2, 3, -3, 4, -4}}) {
    symmetric_ok &= stats::wilcoxon_signed_rank(d).p_value == 1.0;
  }
  return {worst <= kWilcoxonTol && symmetric_ok,
          fmt::format("max |p - oracle| = {:.2e}, symmetric p = 1: {}", worst, symmetric_ok ? "yes" : "no")};
}

Outcome normal_fidelity() {
  // Tie-free n = 50: every attainable W+ over ranks 1..50. The tolerance is
  // applied where exact p <= 0.1; the full-range maximum is reported.
  std::vector<double> ranks(50);
  for (std::size_t i = 0; i < 50; ++i) ranks[i] = static_cast<double>(i + 1);
  double worst_region = 0, worst_all = 0, p_at_worst = 0;
  for (std::uint64_t w = 0; w <= 1275; ++w) {
    double exact = oracle::signed_rank_p_counts(50, w);
    double err = std::abs(stats::normal_signed_rank_p(ranks, static_cast<double>(w)) - exact);
    if (exact <= kNormalRegionP) worst_region = std::max(worst_region, err);
    if (err > worst_all) {
      worst_all = err;
      p_at_worst = exact;
    }
  }
  return {worst_region <= kNormalTol,
          fmt::format("max |dp| = {:.2e} where p <= {}; full range {:.2e} at p = {:.2f}", worst_region,
                      kNormalRegionP, worst_all, p_at_worst)};
}

Outcome bootstrap_coverage() {
  const int trials = 500;
  int covered = 0;
  for (int t = 0; t < trials; ++t) {
    Normal g(stats::stream_seed(0xC0FFEE, static_cast<std::uint64_t>(t)));
    std::vector<double> x(200);
    for (auto& v : x) v = g();
    auto ci = stats::bootstrap_ci(x, 10'000, 0.95, static_cast<std::uint64_t>(t));
    covered += ci.low <= 0.0 && 0.0 <= ci.high;
  }
  double rate = static_cast<double>(covered) / trials;
  return {rate >= kCoverageLow && rate <= kCoverageHigh, fmt::format("coverage {}/{} = {:.3f}", covered, trials, rate)};
}

Outcome rank_biserial() {
  std::vector<double> pos{0.1, 0.5, 2.0, 3.0};
  double r_pos = stats::rank_biserial(pos);
  std::vector<double> ex{3, -1, 2};
  double r_ex = stats::rank_biserial(ex);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> d(static_cast<std::size_t>(5 + t % 30));
    for (auto& x : d) x = g(rng);
    auto neg = d;
    for (auto& x : neg) x = -x;
    worst = std::max(worst, std::abs(stats::rank_biserial(d) + stats::rank_biserial(neg)));
  }
  bool ok = r_pos == 1.0 && std::abs(r_ex - 2.0 / 3.0) <= kRankBiserialTol && worst <= kRankBiserialTol;
  return {ok, fmt::format("all-positive {}, [3,-1,2] {:.6f}, antisymmetry {:.1e}", r_pos, r_ex, worst)};
}

Outcome ground_truth_weights() {
  using namespace probe::ground_truth;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 100);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<AnnotatorProfile> ps;
    for (int i = 0; i < 12; ++i) ps.push_back({"a" + std::to_string(i), u(rng), u(rng), u(rng), "t" + std::to_string(i % 3)});
    auto tw = derive_trust_weights(ps);
    std::map<std::string, std::pair<double, int>> team;
    for (const auto& p : ps) {
      team[p.team_id].first += tw.weight.at(p.annotator_id);
      team[p.team_id].second += 1;
    }
    for (const auto& [id, s] : team) worst = std::max(worst, std::abs(s.first / s.second - 1.0));
  }
  auto wl = weighted_label("r", {{"a", 1}, {"b", 0}, {"c", 1}}, {{"a", 0.5}, {"b", 1.0}, {"c", 1.5}});
  std::vector<AnnotatorProfile> inv{{"x", 1, 1, 10, "t"}, {"y", 2, 2, 20, "t"}, {"z", 3, 3, 30, "t"}};
  auto st = standardize(inv);
  bool iat_ok = st.at("x").iat == 1.0 && st.at("y").iat == 0.5 && st.at("z").iat == 0.0;
  bool ok = worst <= kTeamMeanTol && std::abs(wl.y_hat - 2.0 / 3.0) <= kLabelTol && iat_ok;
  return {ok, fmt::format("team mean dev {:.1e}, y_hat {:.6f}, IAT inversion {}", worst, wl.y_hat, iat_ok ? "exact" : "wrong")};
}

Outcome kappa() {
  std::vector<int> a, b;
  auto add = [&](int n, int x, int y) {
    for (int i = 0; i < n; ++i) {
      a.push_back(x);
      b.push_back(y);
    }
  };
  add(20, 1, 1);
  add(5, 1, 0);
  add(10, 0, 1);
  add(15, 0, 0);
  double k = pairwise_kappa(a, b);
  std::vector<int> p{1, 0, 1, 1, 0};
  double perfect = pairwise_kappa(p, p);
  return {perfect == 1.0 && std::abs(k - 0.4) <= kKappaTol, fmt::format("perfect {}, (20,5,10,15) {:.10f}", perfect, k)};
}

Outcome compliance() {
  auto placeholder = classify("Rewritten Sentence:", "I never really talk about it because people say it is weird.");
  bool refusals_ok = true;
  for (const char* r : {"I'm sorry, I cannot help with that.", "I can't rewrite this sentence.",
                        "As an AI, I am unable to assist with that request."}) {
    refusals_ok &= classify(r, "The meeting ran long and everyone was exhausted.").cls == ComplianceClass::Refusal;
  }
  std::ifstream f(std::string(PROBE_TEST_DATA_DIR) + "/compliance_golden.jsonl");
  if (!f) return fail("golden file missing");
  int n = 0, wrong = 0;
  for (std::string line; std::getline(f, line);) {
    auto j = nlohmann::json::parse(line);
    auto raw = j["raw"].get<std::string>(), src = j["source"].get<std::string>();
    auto v1 = classify(raw, src), v2 = classify(raw, src);
    wrong += v1 != v2 || to_string(v1.cls) != j["expected"].get<std::string>();
    ++n;
  }
  bool ok = placeholder.cls == ComplianceClass::Erasure && refusals_ok && n == 50 && wrong == 0;
  return {ok, fmt::format("placeholder -> {}, refusals {}, golden {}/{} correct", to_string(placeholder.cls),
                          refusals_ok ? "ok" : "wrong", n - wrong, n)};
}

Outcome exclusion_arithmetic() {
  // Compliant pairs swap one word of the source; the rest carry a planted
  // failure on one side, cycling through the four failure classes.
  const char* vocab[] = {"the", "meeting", "ran", "long", "and", "everyone", "was", "tired", "my", "son",
                         "lines", "up", "toys", "teacher", "calls", "it", "odd", "we", "left", "early"};
  const char* planted[] = {"Rewritten Sentence:", "I'm sorry, I cannot help with that.",
                           "Here is a rewrite focusing on directness.\nReasoning: the original uses vague language, "
                           "so the rewrite will clarify intent.",
                           "Purple elephants dance quietly across frozen mountain lakes tonight under violet skies."};
  std::mt19937_64 rng(13274);
  std::uniform_int_distribution<std::size_t> w(0, std::size(vocab) - 1), len(8, 14);
  std::vector<RewritePair> pairs;
  pairs.reserve(kExclusionTotal);
  for (std::size_t i = 0; i < kExclusionTotal; ++i) {
    std::vector<std::string> toks(len(rng));
    for (auto& t : toks) t = vocab[w(rng)];
    auto source = join_tokens(toks);
    auto aut = toks, nt = toks;
    aut[1] = "really";
    nt[2] = "honestly";
    RewritePair p;
    p.record_id = fmt::format("r{:05}", i);
    p.model_id = "m" + std::to_string(i % 7);
    p.raw_aut = join_tokens(aut);
    p.raw_nt = join_tokens(nt);
    if (i >= kExclusionValid) {
      auto k = i - kExclusionValid;
      (k % 2 ? p.raw_nt : p.raw_aut) = planted[k % 4];
    }
    p.verdict_aut = classify(p.raw_aut, source);
    p.verdict_nt = classify(p.raw_nt, source);
    pairs.push_back(std::move(p));
  }
  auto r = exclusion_filter(pairs);
  std::size_t excluded = 0;
  for (const auto& [cls, n] : r.pair_counts) excluded += n;
  bool ok = r.valid.size() == kExclusionValid && excluded == kExclusionTotal - kExclusionValid;
  return {ok, fmt::format("{} pairs -> {} valid, {} excluded", pairs.size(), r.valid.size(), excluded)};
}

Outcome end_to_end() {
  testing_support::TempDir tmp("probe-e2e");
  testing_support::EnvGuard epoch("SOURCE_DATE_EPOCH", "1700000000");
  stub::ChatStub chat;
  stub::ScorerStub scorer;
  testing_support::WorkspaceSpec spec{chat.endpoint(), scorer.base_url(), 20, {"stub-a", "stub/b"}};
  auto cfg = PipelineConfig::load(testing_support::write_workspace(tmp.path(), spec));
  auto run = [&](const fs::path& out) {
    auto c = cfg;
    c.output_dir = out;
    for (auto* cmd : {&cmd_rewrite, &cmd_score, &cmd_stats, &cmd_report}) {
      auto r = (*cmd)(c);
      if (r.exit_code != 0) throw Error("stage failed: " + (r.errors.empty() ? std::string("?") : r.errors.front()));
    }
  };
  run(tmp.path() / "run1");
  run(tmp.path() / "run2");
  auto a = snapshot(tmp.path() / "run1"), b = snapshot(tmp.path() / "run2");
  auto diff = first_difference(a, b);
  if (!diff.empty()) return fail(diff);

  auto table = a.at(kTable1Md);
  auto header = table.substr(0, table.find('\n'));
  const std::string expected = "| Metric | Δ (NT−AUT) | p-value | 95% CI | r |";
  std::size_t charts = 0;
  for (const auto& m : stats::metric_names()) charts += a.count(std::string(kReportDir) + "/" + m + "_delta.svg");
  bool ok = header == expected && charts == stats::metric_names().size();
  return {ok, fmt::format("{} files identical, table header {}, {} charts", a.size(),
                          header == expected ? "ok" : "'" + header + "'", charts)};
}

Outcome persona_invariant() {
  auto corpus = testing_support::synthetic_corpus(200, 3);
  std::size_t bad = 0;
  for (const auto& rec : corpus) {
    auto a = render_rewrite(rec, Persona::Autistic), n = render_rewrite(rec, Persona::Neurotypical);
    auto d = persona_diff(a, n);
    if (d.size() != 1) {
      ++bad;
      continue;
    }
    auto disjoint = [](const std::vector<TextSpan>& spans, const TextSpan& s) {
      for (const auto& r : spans)
        if (r.begin < s.end && s.begin < r.end) return false;
      return true;
    };
    bad += !disjoint(a.record_spans, d[0].a) || !disjoint(n.record_spans, d[0].b);
  }
  return {bad == 0, fmt::format("{} records, {} violations", corpus.size(), bad)};
}

std::vector<qual::AgentSpec> agents(qual::Role role, const std::string& endpoint, const std::string& prefix) {
  std::vector<qual::AgentSpec> out;
  for (int i = 1; i <= 3; ++i) {
    qual::AgentSpec a;
    a.agent_id = prefix + std::to_string(i);
    a.role = role;
    a.model.model_id = "stub-a";
    a.model.endpoint = endpoint;
    out.push_back(a);
  }
  return out;
}

Outcome qualitative_protocol() {
  using namespace probe::qual;
  testing_support::TempDir tmp("probe-qual");
  stub::ChatStub chat;
  std::vector<SourceDocument> docs;
  for (int i = 0; i < 15; ++i) docs.push_back({fmt::format("d{:02}", i), fmt::format("[TEXT: excerpt number {} stays literal]", i)});
  AgentSpec syn;
  syn.agent_id = "syn";
  syn.role = Role::Synthesizer;
  syn.model = agents(Role::InductiveCoder, chat.endpoint(), "x").front().model;

  auto run = [&](const fs::path& out) {
    GatewayOptions go;
    go.cache_dir = out / "cache";
    GatewayPool pool(go);
    InductiveProtocol ind(agents(Role::InductiveCoder, chat.endpoint(), "ic"), syn, pool);
    ind.run("## Set 1: stub-a\nsample rewrites", "sample reasoning");
    DeductiveProtocol ded(agents(Role::DeductiveCoder, chat.endpoint(), "dc"), syn, pool);
    ded.run(docs);
    pool.flush();
    auto all = ind.store().documents();
    auto more = ded.store().documents();
    all.insert(all.end(), more.begin(), more.end());
    write_documents(out / "docs", all);
    std::ofstream(out / "docs" / "theme_codes.csv") << format_theme_codes_csv(ded.theme_codes());
    return all;
  };
  auto docs1 = run(tmp.path() / "a");
  run(tmp.path() / "b");

  // Expected set: per coder reflexivity, rewrite and reasoning analyses, one
  // synthesis; per deductive coder a review, 15 codings and a synthesis, then
  // one cross synthesis.
  std::map<DocKind, std::size_t> count;
  bool ordered = true;
  for (std::size_t i = 0; i < docs1.size(); ++i) {
    ++count[docs1[i].kind];
    if (i > 0 && docs1[i].kind < docs1[i - 1].kind) ordered = false;
  }
  bool full = count[DocKind::Reflexivity] == 3 && count[DocKind::RewriteAnalysis] == 3 &&
              count[DocKind::ReasoningAnalysis] == 3 && count[DocKind::InductiveSynthesis] == 1 &&
              count[DocKind::FrameworkReview] == 3 && count[DocKind::DocumentCoding] == 45 &&
              count[DocKind::DeductiveSynthesis] == 3 && count[DocKind::CrossSynthesis] == 1;

  auto parsed = parse_theme_codes(
      "```codes\nFocus | Present | - | literal | High\nTone | Present | \"flat\" | flat tone | Low\n```", "c", "d");
  bool rejected = parsed.codes && parsed.codes->size() == 1 && parsed.codes->front().theme == Theme::Tone;
  ThemeCode bad;
  bad.status = ThemeStatus::Present;
  bad.code_label = "x";
  bad.confidence = Confidence::High;
  try {
    validate(bad);
    rejected = false;
  } catch (const ValidationError&) {
  }
  auto diff = first_difference(snapshot(tmp.path() / "a" / "docs"), snapshot(tmp.path() / "b" / "docs"));
  bool ok = full && ordered && rejected && diff.empty();
  return {ok, fmt::format("{} documents, set {}, order {}, Present-without-quote {}, rerun {}", docs1.size(),
                          full ? "complete" : "incomplete", ordered ? "ok" : "wrong", rejected ? "rejected" : "accepted",
                          diff.empty() ? "identical" : diff)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> check;
  double budget_s = 0;  // 0: no runtime limit
};

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria{
      {"rouge-oracle-equivalence", rouge_equivalence, kRougeBudgetS},
      {"wilcoxon-exactness", wilcoxon_exactness, kWilcoxonBudgetS},
      {"normal-approximation-fidelity", normal_fidelity},
      {"bootstrap-coverage", bootstrap_coverage, kBootstrapBudgetS},
      {"rank-biserial", rank_biserial},
      {"ground-truth-weights", ground_truth_weights},
      {"kappa", kappa},
      {"compliance-classifier", compliance},
      {"exclusion-arithmetic", exclusion_arithmetic},
      {"end-to-end-determinism", end_to_end, kEndToEndBudgetS},
      {"persona-prompt-invariant", persona_invariant},
      {"qualitative-protocol", qualitative_protocol},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt::format("; over budget of {}s", c.budget_s);
    }
    failures += !o.pass;
    std::printf("%s  %-30s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

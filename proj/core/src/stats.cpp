#include "probe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include <fmt/format.h>

#include "probe/csv.hpp"
#include "probe/error.hpp"

namespace probe::stats {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

__extension__ using u128 = unsigned __int128;

std::string opt_num(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

std::optional<double> parse_opt(const std::string& s, std::size_t row, const char* field) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw SchemaError(fmt::format("stats.csv row {}: '{}' is not a number", row, field), row, field);
  }
  return v;
}

}  // namespace

std::string_view to_string(Method m) { return m == Method::Exact ? "Exact" : "NormalApprox"; }

std::vector<double> abs_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(values[a]) < std::abs(values[b]); });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(values[order[j + 1]]) == std::abs(values[order[i]])) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double exact_signed_rank_p(std::span<const double> ranks, double w_plus) {
  // Work in doubled ranks so average ranks stay integral.
  std::vector<std::size_t> k(ranks.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    k[i] = static_cast<std::size_t>(std::llround(2 * ranks[i]));
    total += k[i];
  }
  std::vector<double> count(total + 1, 0.0);
  count[0] = 1;
  std::size_t reach = 0;
  for (auto ki : k) {
    reach += ki;
    for (std::size_t s = reach; s >= ki; --s) {
      count[s] += count[s - ki];
      if (s == ki) break;
    }
  }
  auto obs = static_cast<std::size_t>(std::llround(2 * w_plus));
  double le = 0, ge = 0;
  for (std::size_t s = 0; s <= total; ++s) {
    if (s <= obs) le += count[s];
    if (s >= obs) ge += count[s];
  }
  double all = std::ldexp(1.0, static_cast<int>(ranks.size()));
  return std::min(1.0, 2 * std::min(le, ge) / all);
}

double normal_signed_rank_p(std::span<const double> ranks, double w_plus) {
  double sum = 0, sq = 0;
  for (double r : ranks) {
    sum += r;
    sq += r * r;
  }
  double mean = sum / 2, sd = std::sqrt(sq / 4);
  if (sd == 0) return 1.0;
  double z = std::max(std::abs(w_plus - mean) - 0.5, 0.0) / sd;
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> deltas, std::size_t exact_max) {
  if (deltas.empty()) throw UsageError("wilcoxon: empty sample");
  WilcoxonResult res;
  auto ranks = abs_ranks(deltas);
  std::vector<double> kept;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (deltas[i] == 0) {
      ++res.n_zero;
      continue;
    }
    kept.push_back(ranks[i]);
    (deltas[i] > 0 ? res.w_plus : res.w_minus) += ranks[i];
  }
  res.n_nonzero = kept.size();
  {
    auto sorted = kept;
    std::sort(sorted.begin(), sorted.end());
    res.has_ties = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
  }
  if (kept.empty()) {
    res.degenerate = true;
    res.p_value = 1.0;
    res.method = Method::NormalApprox;
    return res;
  }
  if (kept.size() <= exact_max) {
    res.method = Method::Exact;
    res.p_value = exact_signed_rank_p(kept, res.w_plus);
  } else {
    res.method = Method::NormalApprox;
    res.p_value = normal_signed_rank_p(kept, res.w_plus);
  }
  return res;
}

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += kGolden);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  // Lemire's multiply-shift with rejection of the biased low region.
  u128 m = static_cast<u128>(next()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<u128>(next()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 base(seed);
  SplitMix64 mixed(base.next() ^ (index * 0xD1B54A32D192ED03ULL));
  return mixed.next();
}

Interval bootstrap_ci(std::span<const double> deltas, std::size_t resamples, double level, std::uint64_t seed) {
  const auto n = deltas.size();
  if (n < 2) throw UsageError("bootstrap_ci: need at least 2 deltas");
  if (resamples == 0) throw UsageError("bootstrap_ci: resamples must be positive");
  if (!(level > 0 && level < 1)) throw UsageError("bootstrap_ci: level must lie in (0, 1)");

  std::vector<double> means(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    SplitMix64 rng(stream_seed(seed, b));
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += deltas[rng.below(n)];
    means[b] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  auto quantile = [&](double q) {
    double h = static_cast<double>(resamples - 1) * q;
    auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= resamples) return means.back();
    return means[lo] + (h - static_cast<double>(lo)) * (means[lo + 1] - means[lo]);
  };
  double tail = (1 - level) / 2;
  return {quantile(tail), quantile(1 - tail)};
}

double rank_biserial(std::span<const double> deltas) {
  std::vector<double> nz;
  for (double d : deltas) {
    if (d != 0) nz.push_back(d);
  }
  if (nz.empty()) throw DegenerateError("rank_biserial: every delta is zero");
  auto ranks = abs_ranks(nz);
  double tp = 0, tm = 0;
  for (std::size_t i = 0; i < nz.size(); ++i) (nz[i] > 0 ? tp : tm) += ranks[i];
  return (tp - tm) / (tp + tm);
}

StatResult analyze(std::string metric, std::span<const double> deltas, const StatOptions& options) {
  if (deltas.empty()) throw UsageError("analyze(" + metric + "): empty sample");
  StatResult r;
  r.metric = std::move(metric);
  r.n = deltas.size();
  r.mean_delta = std::accumulate(deltas.begin(), deltas.end(), 0.0) / static_cast<double>(r.n);
  auto w = wilcoxon_signed_rank(deltas, options.exact_max);
  r.p_value = w.p_value;
  r.method = w.method;
  r.n_zero = w.n_zero;
  r.w_plus = w.w_plus;
  r.w_minus = w.w_minus;
  r.degenerate = w.degenerate;
  if (r.n >= 2) {
    auto ci = bootstrap_ci(deltas, options.resamples, options.level, options.seed);
    r.ci_low = ci.low;
    r.ci_high = ci.high;
  }
  if (!w.degenerate) r.effect_r = rank_biserial(deltas);
  return r;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"rouge1", "rougeL", "cosine", "dpol"};
  return names;
}

std::string_view display_name(std::string_view metric) {
  if (metric == "rouge1") return "ROUGE-1";
  if (metric == "rougeL") return "ROUGE-L";
  if (metric == "cosine") return "Cosine similarity";
  if (metric == "dpol") return "Δ_pol";
  return metric;
}

double metric_delta(const MetricRow& row, std::string_view metric) {
  if (metric == "rouge1") return row.rouge1_nt - row.rouge1_aut;
  if (metric == "rougeL") return row.rougeL_nt - row.rougeL_aut;
  if (metric == "cosine") return row.cos_nt - row.cos_aut;
  if (metric == "dpol") return row.dpol_nt - row.dpol_aut;
  throw UsageError("unknown metric '" + std::string(metric) + "' (expected rouge1, rougeL, cosine or dpol)");
}

std::vector<double> paired_deltas(std::span<const MetricRow> rows, std::string_view metric) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(metric_delta(r, metric));
  return out;
}

std::map<std::string, double> per_model_deltas(std::span<const MetricRow> rows, std::string_view metric) {
  if (rows.empty()) throw UsageError("per_model_deltas: no rows");
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    auto& a = acc[r.model_id];
    a.first += metric_delta(r, metric);
    ++a.second;
  }
  std::map<std::string, double> out;
  for (const auto& [m, a] : acc) out[m] = a.first / static_cast<double>(a.second);
  return out;
}

std::vector<CollapseEntry> collapse_report(std::span<const MetricRow> rows, double threshold) {
  if (rows.empty()) throw UsageError("collapse_report: no rows");
  std::map<std::string, CollapseEntry> acc;
  for (const auto& r : rows) {
    auto& e = acc[r.model_id];
    e.model_id = r.model_id;
    ++e.n;
    e.mean_cos_cross += r.cos_cross;
    e.mean_cos_aut += r.cos_aut;
    e.mean_cos_nt += r.cos_nt;
  }
  std::vector<CollapseEntry> out;
  for (auto& [_, e] : acc) {
    auto n = static_cast<double>(e.n);
    e.mean_cos_cross /= n;
    e.mean_cos_aut /= n;
    e.mean_cos_nt /= n;
    e.flagged = e.mean_cos_cross > threshold;
    e.exceeds_source = e.mean_cos_cross > std::max(e.mean_cos_aut, e.mean_cos_nt);
    out.push_back(e);
  }
  return out;
}

namespace {
const std::vector<std::string> kStatColumns{"metric", "mean_delta", "p_value", "ci_low",  "ci_high",
                                            "effect_r", "n",        "n_zero",  "method",  "w_plus",
                                            "w_minus",  "degenerate", "alternative"};
}

std::string format_stats_csv(std::span<const StatResult> results) {
  std::string out;
  csv::append_row(out, kStatColumns);
  for (const auto& r : results) {
    std::vector<std::string> f{r.metric,
                               fmt::format("{}", r.mean_delta),
                               fmt::format("{}", r.p_value),
                               opt_num(r.ci_low),
                               opt_num(r.ci_high),
                               opt_num(r.effect_r),
                               std::to_string(r.n),
                               std::to_string(r.n_zero),
                               std::string(to_string(r.method)),
                               fmt::format("{}", r.w_plus),
                               fmt::format("{}", r.w_minus),
                               r.degenerate ? "true" : "false",
                               "two-sided"};
    csv::append_row(out, f);
  }
  return out;
}

std::vector<StatResult> parse_stats_csv(std::string_view text) {
  auto t = csv::parse(text);
  std::vector<std::size_t> col;
  for (const auto& c : kStatColumns) {
    auto i = t.column(c);
    if (!i) throw SchemaError("stats.csv: missing column '" + c + "'", 0, c);
    col.push_back(*i);
  }
  std::vector<StatResult> out;
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    const auto& f = t.rows[row];
    auto get = [&](std::size_t k) -> const std::string& { return f[col[k]]; };
    auto req = [&](std::size_t k) {
      auto v = parse_opt(get(k), row + 1, kStatColumns[k].c_str());
      if (!v) throw SchemaError("stats.csv: empty '" + kStatColumns[k] + "'", row + 1, kStatColumns[k]);
      return *v;
    };
    StatResult r;
    r.metric = get(0);
    r.mean_delta = req(1);
    r.p_value = req(2);
    r.ci_low = parse_opt(get(3), row + 1, "ci_low");
    r.ci_high = parse_opt(get(4), row + 1, "ci_high");
    r.effect_r = parse_opt(get(5), row + 1, "effect_r");
    r.n = static_cast<std::size_t>(req(6));
    r.n_zero = static_cast<std::size_t>(req(7));
    r.method = get(8) == "Exact" ? Method::Exact : Method::NormalApprox;
    r.w_plus = req(9);
    r.w_minus = req(10);
    r.degenerate = get(11) == "true";
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_p(double p) {
  if (p >= 0.01) return fmt::format("{:.3f}", p);
  if (p >= 0.001) return fmt::format("{:.4f}", p);
  if (p <= 0) return "0";
  int e = static_cast<int>(std::floor(std::log10(p)));
  double m = p / std::pow(10.0, e);
  if (std::round(m * 100) / 100 >= 10) {
    m /= 10;
    ++e;
  }
  return fmt::format("{:.2f} × 10^{}", m, e);
}

std::string format_delta(double d) {
  auto s = fmt::format("{:+.3f}", d);
  return s == "-0.000" ? "+0.000" : s;
}

std::string format_table1(std::span<const StatResult> results, double alpha, double level) {
  std::string out = fmt::format("| Metric | Δ (NT−AUT) | p-value | {:g}% CI | r |\n", level * 100);
  out += "|---|---|---|---|---|\n";
  for (const auto& r : results) {
    bool sig = !r.degenerate && r.p_value < alpha;
    std::string p = format_p(r.p_value);
    if (r.degenerate) p += " (degenerate)";
    std::string ci = "-", eff = "-";
    if (sig && r.ci_low && r.ci_high) ci = fmt::format("[{:.3f}, {:.3f}]", *r.ci_low, *r.ci_high);
    if (sig && r.effect_r) eff = fmt::format("{:.2f}", std::abs(*r.effect_r));
    out += fmt::format("| {} | {} | {} | {} | {} |\n", display_name(r.metric), format_delta(r.mean_delta), p, ci,
                       eff);
  }
  return out;
}

}  // namespace probe::stats

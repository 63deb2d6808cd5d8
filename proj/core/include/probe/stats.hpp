#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "probe/text_metrics.hpp"

namespace probe::stats {

enum class Method { Exact, NormalApprox };

std::string_view to_string(Method m);

/// Largest non-zero sample size that uses the exact null distribution.
inline constexpr std::size_t kExactMaxN = 25;

struct WilcoxonResult {
  double w_plus = 0;   // sum of ranks of positive deltas
  double w_minus = 0;  // sum of ranks of negative deltas
  double p_value = 1;  // two-sided
  Method method = Method::NormalApprox;
  std::size_t n_nonzero = 0;
  std::size_t n_zero = 0;
  bool has_ties = false;
  bool degenerate = false;  // every delta was zero
};

/// Average ranks (1-based) of |values|.
std::vector<double> abs_ranks(std::span<const double> values);

/// Two-sided Wilcoxon signed-rank test with Pratt zero handling: zeros take
/// part in ranking and are then dropped. With at most `exact_max` non-zero
/// deltas the p-value comes from the exact permutation distribution of the
/// (possibly tied) ranks; otherwise from the normal approximation with
/// tie-aware variance and a 0.5 continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> deltas, std::size_t exact_max = kExactMaxN);

/// Exact two-sided p for W+ over the given ranks, all sign patterns equally
/// likely. Ranks must be multiples of 0.5.
double exact_signed_rank_p(std::span<const double> ranks, double w_plus);

/// Normal-approximation two-sided p for W+ over the given ranks.
double normal_signed_rank_p(std::span<const double> ranks, double w_plus);

/// Deterministic 64-bit stream used for resampling.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

/// Seed of resample `index` under master seed `seed`.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

struct Interval {
  double low = 0;
  double high = 0;
};

/// Percentile bootstrap interval for the mean. Resample b draws its indices
/// from SplitMix64(stream_seed(seed, b)). Quantiles interpolate linearly
/// between order statistics. Throws UsageError when n < 2.
Interval bootstrap_ci(std::span<const double> deltas, std::size_t resamples = 10'000, double level = 0.95,
                      std::uint64_t seed = 0);

/// (T+ - T-) / (T+ + T-) over ranks of the non-zero deltas. Throws
/// DegenerateError when every delta is zero.
double rank_biserial(std::span<const double> deltas);

struct StatOptions {
  std::size_t resamples = 10'000;
  double level = 0.95;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::size_t exact_max = kExactMaxN;
};

struct StatResult {
  std::string metric;
  double mean_delta = 0;
  double p_value = 1;
  std::optional<double> ci_low, ci_high;
  std::optional<double> effect_r;
  std::size_t n = 0;
  std::size_t n_zero = 0;
  Method method = Method::NormalApprox;
  double w_plus = 0, w_minus = 0;
  bool degenerate = false;
};

StatResult analyze(std::string metric, std::span<const double> deltas, const StatOptions& options = {});

/// Metric names accepted by the helpers below, in table order.
const std::vector<std::string>& metric_names();
/// Display name used in table1.md ("ROUGE-1", ...).
std::string_view display_name(std::string_view metric);

/// NT minus AUT for one row. Throws UsageError on an unknown metric.
double metric_delta(const MetricRow& row, std::string_view metric);
std::vector<double> paired_deltas(std::span<const MetricRow> rows, std::string_view metric);

/// Mean NT - AUT per model for one metric.
std::map<std::string, double> per_model_deltas(std::span<const MetricRow> rows, std::string_view metric);

struct CollapseEntry {
  std::string model_id;
  std::size_t n = 0;
  double mean_cos_cross = 0;
  double mean_cos_aut = 0;
  double mean_cos_nt = 0;
  bool flagged = false;         // mean_cos_cross > threshold
  bool exceeds_source = false;  // cross similarity above both source similarities
};

inline constexpr double kCollapseThreshold = 0.85;

std::vector<CollapseEntry> collapse_report(std::span<const MetricRow> rows, double threshold = kCollapseThreshold);

std::string format_stats_csv(std::span<const StatResult> results);
std::vector<StatResult> parse_stats_csv(std::string_view text);

/// Formats a p-value the way the results table does: three decimals down to
/// 0.01, four down to 0.001, scientific "a.bc × 10^e" below that.
std::string format_p(double p);
/// Signed, three decimals; never prints "-0.000".
std::string format_delta(double d);

/// Markdown table with columns Metric | Δ (NT−AUT) | p-value | 95% CI | r.
/// CI and r are "-" for results that are not significant at `alpha`; r is
/// shown as a magnitude, its sign being that of Δ.
std::string format_table1(std::span<const StatResult> results, double alpha = 0.05, double level = 0.95);

}  // namespace probe::stats

#pragma once

// Reference implementations written independently of probe_core, for
// equivalence tests. They favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace oracle {

inline double f1(double overlap, double cand, double ref) {
  if (cand == 0 || ref == 0 || overlap == 0) return 0.0;
  double p = overlap / cand;
  double r = overlap / ref;
  return 2 * p * r / (p + r);
}

/// Clipped unigram overlap by counting every token type in both sequences.
inline double rouge1(const std::vector<std::string>& ref, const std::vector<std::string>& cand) {
  std::map<std::string, int> types;
  for (const auto& t : ref) types[t];
  for (const auto& t : cand) types[t];
  int overlap = 0;
  for (const auto& [type, unused] : types) {
    (void)unused;
    int in_ref = static_cast<int>(std::count(ref.begin(), ref.end(), type));
    int in_cand = static_cast<int>(std::count(cand.begin(), cand.end(), type));
    overlap += std::min(in_ref, in_cand);
  }
  return f1(overlap, static_cast<double>(cand.size()), static_cast<double>(ref.size()));
}

/// Textbook prefix LCS table.
inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
  return t[a.size()][b.size()];
}

inline double rougeL(const std::vector<std::string>& ref, const std::vector<std::string>& cand) {
  return f1(static_cast<double>(lcs_length(ref, cand)), static_cast<double>(cand.size()),
            static_cast<double>(ref.size()));
}

/// Average ranks of |x| by sorting (value, index) pairs.
inline std::vector<double> average_abs_ranks(const std::vector<double>& x) {
  std::vector<std::pair<double, std::size_t>> v;
  for (std::size_t i = 0; i < x.size(); ++i) v.emplace_back(std::fabs(x[i]), i);
  std::sort(v.begin(), v.end());
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) r[v[k].second] = avg;
    i = j;
  }
  return r;
}

/// Two-sided exact p by enumerating all 2^n sign assignments of the ranks.
inline double signed_rank_p_enumerate(const std::vector<double>& ranks, double w_plus_observed) {
  const std::size_t n = ranks.size();
  std::uint64_t le = 0, ge = 0;
  const double eps = 1e-9;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) w += ranks[i];
    if (w <= w_plus_observed + eps) ++le;
    if (w >= w_plus_observed - eps) ++ge;
  }
  double total = std::ldexp(1.0, static_cast<int>(n));
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / total);
}

/// Exact p for untied integer ranks 1..n with 64-bit counts; valid for n <= 62.
inline double signed_rank_p_counts(std::size_t n, std::uint64_t w_plus_observed) {
  const std::size_t max_sum = n * (n + 1) / 2;
  std::vector<std::uint64_t> c(max_sum + 1, 0);
  c[0] = 1;
  for (std::size_t r = 1; r <= n; ++r)
    for (std::size_t s = max_sum; s >= r; --s) c[s] += c[s - r];
  std::uint64_t le = 0, ge = 0;
  for (std::size_t s = 0; s <= max_sum; ++s) {
    if (s <= w_plus_observed) le += c[s];
    if (s >= w_plus_observed) ge += c[s];
  }
  double total = std::ldexp(1.0, static_cast<int>(n));
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / total);
}

/// (T+ - T-) / (T+ + T-) from ranks of the non-zero values.
inline double rank_biserial(const std::vector<double>& x) {
  std::vector<double> nz;
  for (double v : x)
    if (v != 0) nz.push_back(v);
  auto r = average_abs_ranks(nz);
  double tp = 0, tm = 0;
  for (std::size_t i = 0; i < nz.size(); ++i) (nz[i] > 0 ? tp : tm) += r[i];
  return (tp - tm) / (tp + tm);
}

/// Cohen's kappa from a 2x2 contingency table [[a, b], [c, d]].
inline double kappa_2x2(double a, double b, double c, double d) {
  double n = a + b + c + d;
  double po = (a + d) / n;
  double pe = ((a + b) / n) * ((a + c) / n) + ((c + d) / n) * ((b + d) / n);
  return (po - pe) / (1 - pe);
}

}  // namespace oracle

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probe/compliance.hpp"
#include "probe/corpus.hpp"
#include "probe/gateway.hpp"

namespace probe {

/// Per-pair metrics. "aut"/"nt" compare each rewrite to the source target;
/// cos_cross compares the two rewrites with each other.
struct MetricRow {
  std::string record_id;
  std::string model_id;
  double rouge1_aut = 0, rouge1_nt = 0;
  double rougeL_aut = 0, rougeL_nt = 0;
  double cos_aut = 0, cos_nt = 0, cos_cross = 0;
  double p_target = 0, p_aut = 0, p_nt = 0;
  double dpol_aut = 0, dpol_nt = 0;

  bool operator==(const MetricRow&) const = default;
};

/// Column names of metrics.csv, in order.
const std::vector<std::string>& metric_columns();

/// Throws ValidationError if any field is outside its range or a dpol field
/// is not exactly p_x - p_target.
void validate(const MetricRow& row);

double rouge1_f1(std::string_view reference, std::string_view candidate);
double rougeL_f1(std::string_view reference, std::string_view candidate);

/// Throws UsageError on dimension mismatch, DegenerateError on a zero vector.
double cosine(std::span<const double> u, std::span<const double> v);
inline double cosine(const EmbeddingVector& u, const EmbeddingVector& v) { return cosine(u.values, v.values); }

double signed_polarity(const SentimentResult& r);
inline double polarity_change(double p_target, double p_rewrite) { return p_rewrite - p_target; }

/// Fills every metric for one pair. Both sides must be Compliant.
MetricRow score_pair(const RewritePair& pair, const SentenceRecord& source, ScorerClient& scorer);

/// Scores many pairs with one batched embed and one batched sentiment pass
/// over the distinct texts. Rows are returned sorted by (record_id, model_id).
std::vector<MetricRow> score_pairs(const std::vector<RewritePair>& pairs, const std::vector<SentenceRecord>& corpus,
                                   ScorerClient& scorer);

std::string format_metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(std::string_view text);

}  // namespace probe

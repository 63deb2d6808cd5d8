#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "probe/compliance.hpp"
#include "probe/stats.hpp"
#include "probe/text_metrics.hpp"

namespace probe::report {

/// Failure-mode table (Failure Mode | Model(s) | Characteristic Symptom |
/// ROUGE-1 (AUT) | AUT↔NT Sim.) from autistic-side verdicts, followed by a
/// per-model count of every class on both sides.
std::string failure_mode_table(std::span<const RewritePair> pairs, std::span<const MetricRow> rows);

std::string collapse_table(std::span<const stats::CollapseEntry> entries, double threshold);

std::string token_delta_table(std::span<const TokenDelta> deltas);

/// One chart per metric: (file name, SVG text). Bars are per-model mean Δ.
std::vector<std::pair<std::string, std::string>> metric_charts(std::span<const MetricRow> rows);

}  // namespace probe::report

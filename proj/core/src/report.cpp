#include "probe/report.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "probe/svg_chart.hpp"

namespace probe::report {

namespace {

std::string_view symptom(ComplianceClass c) {
  switch (c) {
    case ComplianceClass::Erasure: return "Nothing but a header or placeholder remains after extraction.";
    case ComplianceClass::MetaCommentary: return "Task framing and procedure text in place of rewrite content.";
    case ComplianceClass::HallucinationSuspect: return "Full-length output sharing almost no tokens with the source.";
    case ComplianceClass::Refusal: return "Declines the task.";
    case ComplianceClass::Compliant: return "";
  }
  return "";
}

std::string cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out;
}

}  // namespace

std::string failure_mode_table(std::span<const RewritePair> pairs, std::span<const MetricRow> rows) {
  struct ModelAcc {
    std::size_t pairs = 0;
    std::map<ComplianceClass, std::size_t> aut, nt;
  };
  std::map<std::string, ModelAcc> models;
  for (const auto& p : pairs) {
    auto& m = models[p.model_id];
    ++m.pairs;
    ++m.aut[p.verdict_aut.cls];
    ++m.nt[p.verdict_nt.cls];
  }
  std::map<std::string, std::pair<double, double>> means;  // rouge1-aut, cos-cross
  std::map<std::string, std::size_t> counts;
  for (const auto& r : rows) {
    means[r.model_id].first += r.rouge1_aut;
    means[r.model_id].second += r.cos_cross;
    ++counts[r.model_id];
  }
  for (auto& [m, v] : means) {
    v.first /= static_cast<double>(counts[m]);
    v.second /= static_cast<double>(counts[m]);
  }

  std::string out = "| Failure Mode | Model(s) | Characteristic Symptom | ROUGE-1 (AUT) | AUT↔NT Sim. |\n";
  out += "|---|---|---|---|---|\n";
  const ComplianceClass classes[] = {ComplianceClass::Erasure, ComplianceClass::HallucinationSuspect,
                                     ComplianceClass::MetaCommentary, ComplianceClass::Refusal};
  for (auto c : classes) {
    std::vector<std::pair<std::string, std::size_t>> hit;
    for (const auto& [id, m] : models) {
      auto it = m.aut.find(c);
      if (it != m.aut.end()) hit.emplace_back(id, it->second);
    }
    std::stable_sort(hit.begin(), hit.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::string who, rouge, sim;
    for (const auto& [id, n] : hit) {
      auto sep = who.empty() ? "" : ", ";
      who += fmt::format("{}{} ({}/{})", sep, id, n, models[id].pairs);
      auto mv = means.find(id);
      rouge += sep + (mv == means.end() ? std::string("-") : fmt::format("{:.3f}", mv->second.first));
      sim += sep + (mv == means.end() ? std::string("-") : fmt::format("{:.3f}", mv->second.second));
    }
    if (hit.empty()) who = rouge = sim = "-";
    out += fmt::format("| {} | {} | {} | {} | {} |\n", to_string(c), cell(who), symptom(c), rouge, sim);
  }

  out += "\n| Model | Pairs | Side";
  const ComplianceClass all[] = {ComplianceClass::Compliant, ComplianceClass::Erasure, ComplianceClass::MetaCommentary,
                                 ComplianceClass::HallucinationSuspect, ComplianceClass::Refusal};
  for (auto c : all) out += fmt::format(" | {}", to_string(c));
  out += " |\n|---|---|---|---|---|---|---|---|\n";
  for (const auto& [id, m] : models) {
    for (const auto* side : {&m.aut, &m.nt}) {
      out += fmt::format("| {} | {} | {}", cell(id), m.pairs, side == &m.aut ? "AUT" : "NT");
      for (auto c : all) {
        auto it = side->find(c);
        out += fmt::format(" | {}", it == side->end() ? 0 : it->second);
      }
      out += " |\n";
    }
  }
  return out;
}

std::string collapse_table(std::span<const stats::CollapseEntry> entries, double threshold) {
  std::string out = fmt::format(
      "| Model | N | Mean AUT↔NT cos | Mean cos (AUT, source) | Mean cos (NT, source) | Collapsed (> {:.2f}) | "
      "Cross > source |\n|---|---|---|---|---|---|---|\n",
      threshold);
  double total = 0;
  for (const auto& e : entries) {
    out += fmt::format("| {} | {} | {:.3f} | {:.3f} | {:.3f} | {} | {} |\n", cell(e.model_id), e.n, e.mean_cos_cross,
                       e.mean_cos_aut, e.mean_cos_nt, e.flagged ? "yes" : "no", e.exceeds_source ? "yes" : "no");
    total += e.mean_cos_cross;
  }
  if (!entries.empty()) {
    out += fmt::format("\nMean AUT↔NT cosine across models: {:.3f}\n", total / static_cast<double>(entries.size()));
  }
  return out;
}

std::string token_delta_table(std::span<const TokenDelta> deltas) {
  std::string out = "| Rank | Token | AUT per 10k | NT per 10k | Δ per 10k | AUT count | NT count |\n";
  out += "|---|---|---|---|---|---|---|\n";
  std::size_t rank = 0;
  for (const auto& d : deltas) {
    out += fmt::format("| {} | {} | {:.1f} | {:.1f} | {:+.1f} | {} | {} |\n", ++rank, cell(d.token), d.per10k_a,
                       d.per10k_b, d.delta, d.count_a, d.count_b);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> metric_charts(std::span<const MetricRow> rows) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& metric : stats::metric_names()) {
    std::vector<svg::Bar> bars;
    for (const auto& [model, d] : stats::per_model_deltas(rows, metric)) bars.push_back({model, d});
    svg::ChartOptions opts;
    opts.title = fmt::format("{}: mean Δ (NT − AUT) by model", stats::display_name(metric));
    opts.y_label = "mean Δ (NT − AUT)";
    out.emplace_back(metric + "_delta.svg", svg::bar_chart(bars, opts));
  }
  return out;
}

}  // namespace probe::report

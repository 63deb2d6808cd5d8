#include "probe/ground_truth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "probe/csv.hpp"
#include "probe/tokenize.hpp"

namespace probe::ground_truth {

namespace {

struct Range {
  double lo, hi;
};

Range range_of(std::span<const AnnotatorProfile> profiles, double AnnotatorProfile::*field,
               const char* instrument) {
  Range r{profiles.front().*field, profiles.front().*field};
  for (const auto& p : profiles) {
    if (!std::isfinite(p.*field)) {
      throw ValidationError(fmt::format("annotator '{}': {} score is not finite", p.annotator_id, instrument));
    }
    r.lo = std::min(r.lo, p.*field);
    r.hi = std::max(r.hi, p.*field);
  }
  if (r.hi == r.lo) throw DegenerateScaleError(instrument);
  return r;
}

double scale(double x, Range r) { return (x - r.lo) / (r.hi - r.lo); }

}  // namespace

std::map<std::string, Standardized> standardize(std::span<const AnnotatorProfile> profiles) {
  if (profiles.size() < 2) throw UsageError("standardize: need at least two annotator profiles");
  std::set<std::string> ids;
  for (const auto& p : profiles) {
    if (!ids.insert(p.annotator_id).second) {
      throw ValidationError("duplicate annotator id '" + p.annotator_id + "'");
    }
    if (trim(p.team_id).empty()) throw ValidationError("annotator '" + p.annotator_id + "' has no team");
  }
  const auto aq = range_of(profiles, &AnnotatorProfile::aq, "AQ");
  const auto sata = range_of(profiles, &AnnotatorProfile::sata, "SATA");
  const auto iat = range_of(profiles, &AnnotatorProfile::iat, "IAT");
  std::map<std::string, Standardized> out;
  for (const auto& p : profiles) {
    out[p.annotator_id] = {scale(p.aq, aq), scale(p.sata, sata), 1.0 - scale(p.iat, iat)};
  }
  return out;
}

double raw_trust(const Standardized& s) {
  for (double v : {s.aq, s.sata, s.iat}) {
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError("raw_trust: standardized components must lie in [0, 1]");
  }
  return (s.aq + s.sata + s.iat) / 3.0;
}

std::map<std::string, double> team_weights(const std::map<std::string, double>& raw_trust,
                                           const std::map<std::string, std::string>& team_of) {
  std::map<std::string, std::pair<double, std::size_t>> team_sum;
  for (const auto& [id, r] : raw_trust) {
    auto it = team_of.find(id);
    if (it == team_of.end()) throw UsageError("team_weights: annotator '" + id + "' has no team assignment");
    auto& [sum, count] = team_sum[it->second];
    sum += r;
    ++count;
  }
  std::map<std::string, double> mean;
  for (const auto& [team, acc] : team_sum) {
    double m = acc.first / static_cast<double>(acc.second);
    if (!(m > 0.0)) throw DegenerateTeamError(team);
    mean[team] = m;
  }
  std::map<std::string, double> w;
  for (const auto& [id, r] : raw_trust) w[id] = r / mean.at(team_of.at(id));
  return w;
}

TrustWeights derive_trust_weights(std::span<const AnnotatorProfile> profiles) {
  TrustWeights tw;
  tw.standardized = standardize(profiles);
  std::map<std::string, std::string> team_of;
  for (const auto& p : profiles) team_of[p.annotator_id] = p.team_id;
  for (const auto& [id, s] : tw.standardized) tw.raw_trust[id] = raw_trust(s);
  tw.weight = team_weights(tw.raw_trust, team_of);
  return tw;
}

WeightedLabel weighted_label(const std::string& record_id, const std::map<std::string, int>& labels,
                             const std::map<std::string, double>& weights, double threshold) {
  if (labels.empty()) throw UsageError("record '" + record_id + "': no annotator labels");
  double num = 0.0, den = 0.0;
  for (const auto& [annotator, y] : labels) {
    auto it = weights.find(annotator);
    if (it == weights.end()) {
      throw UsageError("record '" + record_id + "': no weight for annotator '" + annotator + "'");
    }
    if (y != 0 && y != 1) throw UsageError("record '" + record_id + "': labels must be 0 or 1");
    num += it->second * y;
    den += it->second;
  }
  if (!(den > 0.0)) throw DegenerateError("record '" + record_id + "': labeller weights sum to zero");
  WeightedLabel out;
  out.record_id = record_id;
  out.y_hat = num / den;
  out.threshold = threshold;
  out.hard_label = out.y_hat >= threshold ? 1 : 0;
  return out;
}

std::vector<AnnotatorProfile> load_profiles(const std::filesystem::path& path) {
  auto table = csv::read_file(path.string());
  const char* required[] = {"annotator_id", "team_id", "aq", "sata", "iat"};
  std::size_t col[5];
  for (int i = 0; i < 5; ++i) {
    auto c = table.column(required[i]);
    if (!c) throw SchemaError(std::string("profiles file is missing column '") + required[i] + "'", 0, required[i]);
    col[i] = *c;
  }
  std::vector<AnnotatorProfile> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto number = [&](int i) {
      auto cell = trim(row[col[i]]);
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw SchemaError(fmt::format("row {}: field '{}' is not a number", r + 1, required[i]), r + 1, required[i]);
      }
      return v;
    };
    AnnotatorProfile p;
    p.annotator_id = trim(row[col[0]]);
    p.team_id = trim(row[col[1]]);
    if (p.annotator_id.empty()) throw SchemaError(fmt::format("row {}: missing annotator_id", r + 1), r + 1, "annotator_id");
    p.aq = number(2);
    p.sata = number(3);
    p.iat = number(4);
    out.push_back(std::move(p));
  }
  return out;
}

std::string format_weighted_labels(std::span<const WeightedLabel> labels) {
  std::string out;
  csv::append_row(out, std::vector<std::string>{"record_id", "y_hat", "hard_label"});
  for (const auto& l : labels) {
    csv::append_row(out, std::vector<std::string>{l.record_id, fmt::format("{:.6f}", l.y_hat),
                                                  std::to_string(l.hard_label)});
  }
  return out;
}

}  // namespace probe::ground_truth

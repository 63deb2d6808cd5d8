#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "probe/error.hpp"

namespace probe::ground_truth {

/// Raw instrument totals for one annotator.
struct AnnotatorProfile {
  std::string annotator_id;
  double aq = 0.0;
  double sata = 0.0;
  double iat = 0.0;
  std::string team_id;
};

/// Min-max scaled scores oriented so that higher means more reliable.
struct Standardized {
  double aq = 0.0;
  double sata = 0.0;
  double iat = 0.0;  // inverted: 1 - scaled raw IAT
};

struct TrustWeights {
  std::map<std::string, Standardized> standardized;
  std::map<std::string, double> raw_trust;
  std::map<std::string, double> weight;
};

struct WeightedLabel {
  std::string record_id;
  double y_hat = 0.0;
  int hard_label = 0;
  double threshold = 0.5;
};

inline constexpr double kDefaultThreshold = 0.5;

class DegenerateScaleError : public DegenerateError {
 public:
  explicit DegenerateScaleError(std::string instrument)
      : DegenerateError("instrument '" + instrument + "' is constant across annotators; min-max scaling is undefined"),
        instrument_(std::move(instrument)) {}
  const std::string& instrument() const noexcept { return instrument_; }

 private:
  std::string instrument_;
};

class DegenerateTeamError : public DegenerateError {
 public:
  explicit DegenerateTeamError(std::string team)
      : DegenerateError("team '" + team + "' has mean raw trust 0; weights are undefined"), team_(std::move(team)) {}
  const std::string& team() const noexcept { return team_; }

 private:
  std::string team_;
};

/// Global min-max scaling per instrument over every supplied profile; IAT is
/// inverted so a lower implicit-bias score maps to a higher value.
std::map<std::string, Standardized> standardize(std::span<const AnnotatorProfile> profiles);

/// Arithmetic mean of the three standardized components.
double raw_trust(const Standardized& s);

/// W_i = R_i / mean(R_j for j in team(i)).
std::map<std::string, double> team_weights(const std::map<std::string, double>& raw_trust,
                                           const std::map<std::string, std::string>& team_of);

TrustWeights derive_trust_weights(std::span<const AnnotatorProfile> profiles);

/// y_hat = sum(W_i * y_i) / sum(W_i) over the annotators that labelled the
/// record; hard label is 1 iff y_hat >= threshold.
WeightedLabel weighted_label(const std::string& record_id, const std::map<std::string, int>& labels,
                             const std::map<std::string, double>& weights,
                             double threshold = kDefaultThreshold);

/// CSV columns: annotator_id, team_id, aq, sata, iat.
std::vector<AnnotatorProfile> load_profiles(const std::filesystem::path& path);

/// CSV columns: record_id, y_hat, hard_label.
std::string format_weighted_labels(std::span<const WeightedLabel> labels);

}  // namespace probe::ground_truth

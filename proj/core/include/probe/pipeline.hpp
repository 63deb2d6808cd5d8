#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "probe/config.hpp"

namespace probe {

/// Outcome of one CLI command. exit_code is nonzero iff any record-level
/// error occurred; `errors` enumerates them.
struct CommandResult {
  int exit_code = 0;
  std::vector<std::string> errors;
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> notes;  // informational lines for the console

  void fail(std::string message) {
    errors.push_back(std::move(message));
    exit_code = 1;
  }
};

// File names inside the output directory.
inline constexpr const char* kResponsesCsv = "responses.csv";
inline constexpr const char* kRewritesCsv = "rewrites.csv";
inline constexpr const char* kErrorsCsv = "errors.csv";
inline constexpr const char* kExclusionsCsv = "exclusions.csv";
inline constexpr const char* kMetricsCsv = "metrics.csv";
inline constexpr const char* kStatsCsv = "stats.csv";
inline constexpr const char* kTable1Md = "table1.md";
inline constexpr const char* kReportDir = "report";
inline constexpr const char* kQualDir = "qual";
inline constexpr const char* kWeightedLabelsCsv = "weighted_labels.csv";

/// Renders every record under every configured condition for every model,
/// classifies rewrite outputs and writes responses.csv, rewrites.csv,
/// errors.csv and manifest.json. Failed calls become error rows.
CommandResult cmd_rewrite(const PipelineConfig& config);

/// rewrites.csv -> exclusions.csv + metrics.csv (valid pairs only).
CommandResult cmd_score(const PipelineConfig& config);

/// metrics.csv -> stats.csv + table1.md.
CommandResult cmd_stats(const PipelineConfig& config);

/// Charts and Markdown tables under report/, from files already in the
/// output directory.
CommandResult cmd_report(const PipelineConfig& config);

/// Trust-weighted labels for every corpus record -> weighted_labels.csv.
/// Records that cannot be labelled are reported and skipped.
CommandResult cmd_groundtruth(const PipelineConfig& config);

/// Inductive then deductive agent protocols -> qual/.
CommandResult cmd_qual(const PipelineConfig& config);

struct IngestOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> scores;
  std::size_t band_size = 15;
};

/// Validates a corpus, converts it to the format implied by `output`'s
/// extension and, given agreement scores, writes bands.csv next to it.
CommandResult cmd_ingest(const IngestOptions& options);

}  // namespace probe

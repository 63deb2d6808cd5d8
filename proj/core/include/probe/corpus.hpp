#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace probe {

/// One corpus item with optional surrounding context and per-annotator labels.
struct SentenceRecord {
  std::string id;
  std::optional<std::string> preceding;
  std::string target;
  std::optional<std::string> following;
  std::map<std::string, int> labels;  // annotator id -> 0/1
  std::map<std::string, std::string> justifications;

  bool operator==(const SentenceRecord&) const = default;
};

enum class CorpusFormat { Csv, Jsonl };

/// Infers the format from the extension (.csv / .jsonl / .ndjson).
CorpusFormat corpus_format_for(const std::filesystem::path& path);

// CSV layout: id, preceding, target, following, then one column per annotator
// label. Columns named "justification:<annotator>" hold free-text
// justifications; an "agreement" column is reserved for stratification scores
// and ignored here. Empty context cells mean "absent".
//
// JSONL layout: one object per line with keys id, preceding, target, following,
// labels {annotator: 0|1}, justifications {annotator: text}.

std::vector<SentenceRecord> parse_corpus(std::string_view text, CorpusFormat format);
std::vector<SentenceRecord> load_corpus(const std::filesystem::path& path, CorpusFormat format);
std::vector<SentenceRecord> load_corpus(const std::filesystem::path& path);

std::string serialize_corpus(std::span<const SentenceRecord> records, CorpusFormat format);
void save_corpus(const std::filesystem::path& path, std::span<const SentenceRecord> records,
                 CorpusFormat format);

/// SHA-256 over the canonical JSON form of every record field, in order.
std::string corpus_hash(std::span<const SentenceRecord> records);

/// Reads per-record agreement scores from a CSV with columns `id` and `column`.
std::map<std::string, double> load_scores(const std::filesystem::path& path,
                                          const std::string& column = "agreement");

/// Cohen's kappa for two binary raters. Throws DegenerateError when chance
/// agreement is 1 (both raters constant on the same class).
double pairwise_kappa(std::span<const int> a, std::span<const int> b);

struct AgreementBands {
  std::vector<SentenceRecord> highest;
  std::vector<SentenceRecord> median;
  std::vector<SentenceRecord> lowest;
};

/// Orders records by score (descending, ties by id ascending) and cuts three
/// disjoint bands of `band_size`: the top, the window centred on the median,
/// and the bottom.
AgreementBands stratify_by_agreement(std::span<const SentenceRecord> records,
                                     const std::map<std::string, double>& scores,
                                     std::size_t band_size);

}  // namespace probe

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace probe {

enum class ComplianceClass { Compliant, Erasure, MetaCommentary, HallucinationSuspect, Refusal };

std::string_view to_string(ComplianceClass c);
ComplianceClass parse_compliance_class(std::string_view name);

/// Rule ids recorded in ComplianceVerdict::matched_rules.
namespace rule {
inline constexpr std::string_view kRefusal = "refusal";
inline constexpr std::string_view kErasure = "erasure";
inline constexpr std::string_view kMetaCommentary = "meta_commentary";
inline constexpr std::string_view kHallucination = "hallucination_suspect";
}  // namespace rule

struct RuleConfig {
  std::vector<std::string> header_lexicon{"rewritten sentence", "here's", "here is", "reasoning", "step", "okay,"};
  std::vector<std::string> refusal_lexicon{"i cannot", "i can't", "i'm sorry", "unable to assist"};
  /// Words that mark a short "xxx:" prefix as a label rather than content.
  std::vector<std::string> label_words{"rewrite", "rewritten", "version", "sentence", "output", "answer"};
  std::size_t erasure_threshold = 3;
  std::size_t meta_min_header_hits = 2;
  double meta_jaccard_max = 0.15;
  double hallucination_jaccard_max = 0.05;
  double hallucination_min_length_ratio = 0.5;

  /// Throws ValidationError on out-of-range thresholds or empty lexicon entries.
  void validate() const;
  nlohmann::json to_json() const;
  static RuleConfig from_json(const nlohmann::json& j);
};

struct ComplianceVerdict {
  ComplianceClass cls = ComplianceClass::Compliant;
  std::string extracted;
  std::vector<std::string> matched_rules;
  bool operator==(const ComplianceVerdict&) const = default;
};

/// Strips header lines, label prefixes, code fences and wrapping quotes, then
/// cuts at the first header line following the content. Idempotent.
std::string extract_content(std::string_view raw, const RuleConfig& rules = {});

/// Word-bounded occurrences of header-lexicon patterns in `raw`.
std::size_t header_hits(std::string_view raw, const RuleConfig& rules = {});

/// Set Jaccard over the shared tokenizer; 0 when both sides are empty.
double token_jaccard(std::string_view a, std::string_view b);

/// Precedence: Refusal > Erasure > MetaCommentary > HallucinationSuspect >
/// Compliant. Every rule that fires is listed in matched_rules.
ComplianceVerdict classify(std::string_view raw, std::string_view source, const RuleConfig& rules = {});

/// The two persona-conditioned outputs of one model for one record.
struct RewritePair {
  std::string record_id;
  std::string model_id;
  std::string raw_aut;
  std::string raw_nt;
  ComplianceVerdict verdict_aut;
  ComplianceVerdict verdict_nt;

  bool valid() const {
    return verdict_aut.cls == ComplianceClass::Compliant && verdict_nt.cls == ComplianceClass::Compliant;
  }
};

struct ExclusionResult {
  std::vector<RewritePair> valid;
  std::vector<RewritePair> excluded;
  /// Non-compliant outputs per class, counting each side separately.
  std::map<ComplianceClass, std::size_t> side_counts;
  /// Excluded pairs by the class of their first non-compliant side (AUT checked first).
  std::map<ComplianceClass, std::size_t> pair_counts;
};

ExclusionResult exclusion_filter(std::vector<RewritePair> pairs);

/// rewrites.csv: record-id, model-id, raw and extracted text, class and
/// matched rules for each side.
std::string format_rewrites_csv(const std::vector<RewritePair>& pairs);
std::vector<RewritePair> parse_rewrites_csv(std::string_view text);

/// exclusions.csv: one row per class with side and pair counts, plus totals.
std::string format_exclusions_csv(const ExclusionResult& result);

struct TokenDelta {
  std::string token;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  double per10k_a = 0;
  double per10k_b = 0;
  double delta = 0;  // per10k_a - per10k_b
};

/// Ranks tokens by per-10k frequency difference (a minus b), descending;
/// ties broken by token. Throws UsageError if either corpus has no tokens.
std::vector<TokenDelta> token_frequency_delta(const std::vector<std::string>& corpus_a,
                                              const std::vector<std::string>& corpus_b, std::size_t top_k);

}  // namespace probe

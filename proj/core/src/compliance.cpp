#include "probe/compliance.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>

#include "probe/csv.hpp"
#include "probe/error.hpp"
#include "probe/tokenize.hpp"

namespace probe {

namespace {

bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80; }

std::string normalize(std::string_view s) { return to_lower_ascii(fold_punctuation(s)); }

// Occurrences of `pat` in `hay` that start on a word boundary and, when the
// pattern ends in a word character, also end on one.
std::size_t count_bounded(std::string_view hay, std::string_view pat, bool first_only = false) {
  if (pat.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = hay.find(pat); pos != std::string_view::npos; pos = hay.find(pat, pos + 1)) {
    bool left = pos == 0 || !is_word(hay[pos - 1]) || !is_word(pat.front());
    auto end = pos + pat.size();
    bool right = end == hay.size() || !is_word(hay[end]) || !is_word(pat.back());
    if (left && right) {
      ++n;
      if (first_only) break;
    }
  }
  return n;
}

std::string_view strip_markup_left(std::string_view s) {
  while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.front())) || s.front() == '#' || s.front() == '*' ||
                        s.front() == '_' || s.front() == '>' || s.front() == '-' || s.front() == '`')) {
    s.remove_prefix(1);
  }
  return s;
}

std::string_view strip_markup_right(std::string_view s) {
  while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.back())) || s.back() == '*' || s.back() == '_')) {
    s.remove_suffix(1);
  }
  return s;
}

bool is_header(std::string_view line, const RuleConfig& rules) {
  auto norm = normalize(strip_markup_left(line));
  for (const auto& p : rules.header_lexicon) {
    auto pat = normalize(p);
    if (!norm.starts_with(pat)) continue;
    if (is_word(pat.back()) && norm.size() > pat.size() && is_word(norm[pat.size()])) continue;
    return true;
  }
  return false;
}

bool is_label(std::string_view line, const RuleConfig& rules) {
  auto colon = line.find(':');
  if (colon == std::string_view::npos) return false;
  auto words = tokenize(line.substr(0, colon));
  if (words.empty() || words.size() > 5) return false;
  for (const auto& w : words) {
    for (const auto& l : rules.label_words) {
      if (w == normalize(l)) return true;
    }
  }
  return false;
}

std::string after_colon(std::string_view line) {
  auto colon = line.find(':');
  if (colon == std::string_view::npos) return {};
  return std::string(strip_markup_left(strip_markup_right(line.substr(colon + 1))));
}

bool is_fence(std::string_view line) { return trim(line).starts_with("```"); }

std::string unwrap_quotes(std::string s) {
  static const std::pair<std::string_view, std::string_view> kPairs[] = {
      {"\"", "\""}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}, {"'", "'"}, {"\xE2\x80\x98", "\xE2\x80\x99"}};
  for (auto [open, close] : kPairs) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
      auto inner = s.substr(open.size(), s.size() - open.size() - close.size());
      // Only unwrap a single quoted span, not "a" and "b".
      if (inner.find(close) == std::string::npos) return trim(inner);
    }
  }
  return s;
}

std::string extract_once(std::string_view raw, const RuleConfig& rules) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= raw.size();) {
    auto nl = raw.find('\n', start);
    auto line = raw.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }

  std::vector<std::string> body;
  std::size_t i = 0;
  for (; i < lines.size(); ++i) {
    auto t = trim(lines[i]);
    if (t.empty() || is_fence(t)) continue;
    if (is_header(t, rules) || is_label(t, rules)) {
      auto rest = after_colon(t);
      if (!rest.empty()) {
        body.push_back(rest);
        ++i;
        break;
      }
      continue;
    }
    break;
  }
  for (; i < lines.size(); ++i) {
    if (is_fence(lines[i])) continue;
    if (is_header(trim(lines[i]), rules)) break;
    body.emplace_back(lines[i]);
  }
  std::string joined;
  for (std::size_t k = 0; k < body.size(); ++k) {
    if (k) joined += '\n';
    joined += body[k];
  }
  return unwrap_quotes(trim(joined));
}

}  // namespace

std::string_view to_string(ComplianceClass c) {
  switch (c) {
    case ComplianceClass::Compliant: return "Compliant";
    case ComplianceClass::Erasure: return "Erasure";
    case ComplianceClass::MetaCommentary: return "MetaCommentary";
    case ComplianceClass::HallucinationSuspect: return "HallucinationSuspect";
    case ComplianceClass::Refusal: return "Refusal";
  }
  return "?";
}

ComplianceClass parse_compliance_class(std::string_view name) {
  for (auto c : {ComplianceClass::Compliant, ComplianceClass::Erasure, ComplianceClass::MetaCommentary,
                 ComplianceClass::HallucinationSuspect, ComplianceClass::Refusal}) {
    if (to_lower_ascii(to_string(c)) == to_lower_ascii(name)) return c;
  }
  throw ValidationError("unknown compliance class '" + std::string(name) + "'");
}

void RuleConfig::validate() const {
  auto check_lex = [](const std::vector<std::string>& lex, const char* name) {
    for (const auto& p : lex) {
      if (trim(p).empty()) throw ValidationError(std::string("rules: empty entry in ") + name);
    }
  };
  check_lex(header_lexicon, "header_lexicon");
  check_lex(refusal_lexicon, "refusal_lexicon");
  check_lex(label_words, "label_words");
  auto unit = [](double v, const char* name) {
    if (!(v >= 0 && v <= 1)) throw ValidationError(std::string("rules: ") + name + " outside [0, 1]");
  };
  unit(meta_jaccard_max, "meta_jaccard_max");
  unit(hallucination_jaccard_max, "hallucination_jaccard_max");
  if (!(hallucination_min_length_ratio >= 0)) throw ValidationError("rules: negative hallucination_min_length_ratio");
  if (meta_min_header_hits == 0) throw ValidationError("rules: meta_min_header_hits must be positive");
}

nlohmann::json RuleConfig::to_json() const {
  return {{"header_lexicon", header_lexicon},
          {"refusal_lexicon", refusal_lexicon},
          {"label_words", label_words},
          {"erasure_threshold", erasure_threshold},
          {"meta_min_header_hits", meta_min_header_hits},
          {"meta_jaccard_max", meta_jaccard_max},
          {"hallucination_jaccard_max", hallucination_jaccard_max},
          {"hallucination_min_length_ratio", hallucination_min_length_ratio}};
}

RuleConfig RuleConfig::from_json(const nlohmann::json& j) {
  RuleConfig r;
  try {
    r.header_lexicon = j.value("header_lexicon", r.header_lexicon);
    r.refusal_lexicon = j.value("refusal_lexicon", r.refusal_lexicon);
    r.label_words = j.value("label_words", r.label_words);
    r.erasure_threshold = j.value("erasure_threshold", r.erasure_threshold);
    r.meta_min_header_hits = j.value("meta_min_header_hits", r.meta_min_header_hits);
    r.meta_jaccard_max = j.value("meta_jaccard_max", r.meta_jaccard_max);
    r.hallucination_jaccard_max = j.value("hallucination_jaccard_max", r.hallucination_jaccard_max);
    r.hallucination_min_length_ratio = j.value("hallucination_min_length_ratio", r.hallucination_min_length_ratio);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("rules: ") + e.what());
  }
  r.validate();
  return r;
}

std::string extract_content(std::string_view raw, const RuleConfig& rules) {
  std::string cur = extract_once(raw, rules);
  // Unwrapping quotes can expose another header; iterate to a fixpoint.
  for (int guard = 0; guard < 32; ++guard) {
    auto next = extract_once(cur, rules);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

std::size_t header_hits(std::string_view raw, const RuleConfig& rules) {
  auto norm = normalize(raw);
  std::size_t n = 0;
  for (const auto& p : rules.header_lexicon) n += count_bounded(norm, normalize(p));
  return n;
}

double token_jaccard(std::string_view a, std::string_view b) {
  auto ta = tokenize(a), tb = tokenize(b);
  std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  auto uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

ComplianceVerdict classify(std::string_view raw, std::string_view source, const RuleConfig& rules) {
  ComplianceVerdict v;
  v.extracted = extract_content(raw, rules);

  auto norm = normalize(raw);
  bool refusal = std::any_of(rules.refusal_lexicon.begin(), rules.refusal_lexicon.end(),
                             [&](const std::string& p) { return count_bounded(norm, normalize(p), true) > 0; });
  auto content_tokens = tokenize(v.extracted).size();
  auto source_tokens = tokenize(source).size();
  bool erasure = content_tokens < rules.erasure_threshold;
  double jac = token_jaccard(v.extracted, source);
  bool meta = header_hits(raw, rules) >= rules.meta_min_header_hits && jac < rules.meta_jaccard_max;
  bool halluc = jac < rules.hallucination_jaccard_max &&
                static_cast<double>(content_tokens) >=
                    rules.hallucination_min_length_ratio * static_cast<double>(source_tokens);

  if (refusal) v.matched_rules.emplace_back(rule::kRefusal);
  if (erasure) v.matched_rules.emplace_back(rule::kErasure);
  if (meta) v.matched_rules.emplace_back(rule::kMetaCommentary);
  if (halluc) v.matched_rules.emplace_back(rule::kHallucination);

  v.cls = refusal   ? ComplianceClass::Refusal
          : erasure ? ComplianceClass::Erasure
          : meta    ? ComplianceClass::MetaCommentary
          : halluc  ? ComplianceClass::HallucinationSuspect
                    : ComplianceClass::Compliant;
  return v;
}

ExclusionResult exclusion_filter(std::vector<RewritePair> pairs) {
  ExclusionResult out;
  for (auto& p : pairs) {
    for (const auto* v : {&p.verdict_aut, &p.verdict_nt}) {
      if (v->cls != ComplianceClass::Compliant) ++out.side_counts[v->cls];
    }
    if (p.valid()) {
      out.valid.push_back(std::move(p));
    } else {
      auto cls = p.verdict_aut.cls != ComplianceClass::Compliant ? p.verdict_aut.cls : p.verdict_nt.cls;
      ++out.pair_counts[cls];
      out.excluded.push_back(std::move(p));
    }
  }
  return out;
}

namespace {

const std::vector<std::string> kRewriteColumns{"record-id",   "model-id",   "raw-aut",   "raw-nt",
                                               "class-aut",   "class-nt",   "content-aut", "content-nt",
                                               "rules-aut",   "rules-nt"};

std::string join_rules(const std::vector<std::string>& rules) {
  std::string out;
  for (const auto& r : rules) out += (out.empty() ? "" : ";") + r;
  return out;
}

std::vector<std::string> split_rules(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t start = 0; start < s.size();) {
    auto semi = s.find(';', start);
    auto end = semi == std::string::npos ? s.size() : semi;
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

std::string format_rewrites_csv(const std::vector<RewritePair>& pairs) {
  std::string out;
  csv::append_row(out, kRewriteColumns);
  for (const auto& p : pairs) {
    csv::append_row(out, std::vector<std::string>{p.record_id, p.model_id, p.raw_aut, p.raw_nt,
                                                  std::string(to_string(p.verdict_aut.cls)),
                                                  std::string(to_string(p.verdict_nt.cls)), p.verdict_aut.extracted,
                                                  p.verdict_nt.extracted, join_rules(p.verdict_aut.matched_rules),
                                                  join_rules(p.verdict_nt.matched_rules)});
  }
  return out;
}

std::vector<RewritePair> parse_rewrites_csv(std::string_view text) {
  auto t = csv::parse(text);
  std::vector<std::size_t> col;
  for (const auto& c : kRewriteColumns) {
    auto i = t.column(c);
    if (!i) throw SchemaError("rewrites.csv: missing column '" + c + "'", 0, c);
    col.push_back(*i);
  }
  std::vector<RewritePair> out;
  for (const auto& r : t.rows) {
    RewritePair p;
    p.record_id = r[col[0]];
    p.model_id = r[col[1]];
    p.raw_aut = r[col[2]];
    p.raw_nt = r[col[3]];
    p.verdict_aut = {parse_compliance_class(r[col[4]]), r[col[6]], split_rules(r[col[8]])};
    p.verdict_nt = {parse_compliance_class(r[col[5]]), r[col[7]], split_rules(r[col[9]])};
    out.push_back(std::move(p));
  }
  return out;
}

std::string format_exclusions_csv(const ExclusionResult& result) {
  std::string out;
  csv::append_row(out, std::vector<std::string>{"class", "non-compliant-sides", "excluded-pairs"});
  for (auto c : {ComplianceClass::Erasure, ComplianceClass::MetaCommentary, ComplianceClass::HallucinationSuspect,
                 ComplianceClass::Refusal}) {
    auto side = result.side_counts.count(c) ? result.side_counts.at(c) : 0;
    auto pair = result.pair_counts.count(c) ? result.pair_counts.at(c) : 0;
    csv::append_row(out, std::vector<std::string>{std::string(to_string(c)), std::to_string(side),
                                                  std::to_string(pair)});
  }
  csv::append_row(out, std::vector<std::string>{"total-excluded", "", std::to_string(result.excluded.size())});
  csv::append_row(out, std::vector<std::string>{"valid", "", std::to_string(result.valid.size())});
  return out;
}

std::vector<TokenDelta> token_frequency_delta(const std::vector<std::string>& corpus_a,
                                              const std::vector<std::string>& corpus_b, std::size_t top_k) {
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> counts;
  std::size_t total_a = 0, total_b = 0;
  for (const auto& t : corpus_a) {
    for (auto& w : word_tokens(t)) {
      ++counts[std::move(w)].first;
      ++total_a;
    }
  }
  for (const auto& t : corpus_b) {
    for (auto& w : word_tokens(t)) {
      ++counts[std::move(w)].second;
      ++total_b;
    }
  }
  if (total_a == 0 || total_b == 0) throw UsageError("token_frequency_delta: both corpora need at least one token");

  std::vector<TokenDelta> out;
  out.reserve(counts.size());
  for (const auto& [tok, c] : counts) {
    TokenDelta d{tok, c.first, c.second, 1e4 * static_cast<double>(c.first) / static_cast<double>(total_a),
                 1e4 * static_cast<double>(c.second) / static_cast<double>(total_b), 0};
    d.delta = d.per10k_a - d.per10k_b;
    out.push_back(std::move(d));
  }
  std::sort(out.begin(), out.end(), [](const TokenDelta& x, const TokenDelta& y) {
    return x.delta != y.delta ? x.delta > y.delta : x.token < y.token;
  });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

}  // namespace probe

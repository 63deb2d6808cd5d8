#include "probe/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>

#include "probe/csv.hpp"
#include "probe/error.hpp"
#include "probe/tokenize.hpp"

namespace probe {

namespace {

double f1(double overlap, std::size_t cand, std::size_t ref) {
  if (cand == 0 || ref == 0 || overlap == 0) return 0.0;
  double p = overlap / static_cast<double>(cand);
  double r = overlap / static_cast<double>(ref);
  return 2 * p * r / (p + r);
}

double parse_double(const std::string& s, std::size_t row, const std::string& field) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw SchemaError("metrics.csv row " + std::to_string(row) + ": '" + field + "' is not a number", row, field);
  }
  return v;
}

}  // namespace

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{
      "record-id", "model-id", "rouge1-aut", "rouge1-nt", "rougeL-aut", "rougeL-nt", "cos-aut", "cos-nt",
      "cos-cross", "p-target",  "p-aut",     "p-nt",      "dpol-aut",   "dpol-nt"};
  return cols;
}

void validate(const MetricRow& r) {
  auto in = [&](double v, double lo, double hi, const char* name) {
    if (!(v >= lo && v <= hi)) {
      throw ValidationError(fmt::format("metric row {}/{}: {} = {} outside [{}, {}]", r.record_id, r.model_id, name,
                                        v, lo, hi));
    }
  };
  in(r.rouge1_aut, 0, 1, "rouge1-aut");
  in(r.rouge1_nt, 0, 1, "rouge1-nt");
  in(r.rougeL_aut, 0, 1, "rougeL-aut");
  in(r.rougeL_nt, 0, 1, "rougeL-nt");
  in(r.cos_aut, -1, 1, "cos-aut");
  in(r.cos_nt, -1, 1, "cos-nt");
  in(r.cos_cross, -1, 1, "cos-cross");
  in(r.p_target, -1, 1, "p-target");
  in(r.p_aut, -1, 1, "p-aut");
  in(r.p_nt, -1, 1, "p-nt");
  in(r.dpol_aut, -2, 2, "dpol-aut");
  in(r.dpol_nt, -2, 2, "dpol-nt");
  if (r.dpol_aut != r.p_aut - r.p_target || r.dpol_nt != r.p_nt - r.p_target) {
    throw ValidationError("metric row " + r.record_id + "/" + r.model_id + ": dpol is not p_rewrite - p_target");
  }
}

double rouge1_f1(std::string_view reference, std::string_view candidate) {
  auto ref = tokenize(reference), cand = tokenize(candidate);
  std::unordered_map<std::string, std::size_t> ref_counts;
  for (const auto& t : ref) ++ref_counts[t];
  std::size_t overlap = 0;
  for (const auto& t : cand) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  return f1(static_cast<double>(overlap), cand.size(), ref.size());
}

double rougeL_f1(std::string_view reference, std::string_view candidate) {
  auto ref = tokenize(reference), cand = tokenize(candidate);
  std::vector<std::size_t> prev(cand.size() + 1, 0), cur(cand.size() + 1, 0);
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    for (std::size_t j = 1; j <= cand.size(); ++j) {
      cur[j] = ref[i - 1] == cand[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return f1(static_cast<double>(prev[cand.size()]), cand.size(), ref.size());
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw UsageError(fmt::format("cosine: dimension mismatch ({} vs {})", u.size(), v.size()));
  }
  double dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0 || vv == 0) throw DegenerateError("cosine: zero-norm vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

double signed_polarity(const SentimentResult& r) { return r.sign() * r.confidence; }

MetricRow score_pair(const RewritePair& pair, const SentenceRecord& source, ScorerClient& scorer) {
  return score_pairs({pair}, {source}, scorer).front();
}

std::vector<MetricRow> score_pairs(const std::vector<RewritePair>& pairs, const std::vector<SentenceRecord>& corpus,
                                   ScorerClient& scorer) {
  std::unordered_map<std::string, const SentenceRecord*> by_id;
  for (const auto& r : corpus) by_id[r.id] = &r;

  // Distinct texts, in first-seen order so requests are deterministic.
  std::vector<std::string> texts;
  std::unordered_map<std::string, std::size_t> slot;
  auto intern = [&](const std::string& t) {
    auto [it, fresh] = slot.emplace(t, texts.size());
    if (fresh) texts.push_back(t);
    return it->second;
  };
  struct Idx {
    std::size_t src, aut, nt;
  };
  std::vector<Idx> idx;
  for (const auto& p : pairs) {
    if (!p.valid()) throw UsageError("score_pairs: pair " + p.record_id + "/" + p.model_id + " is not compliant");
    auto it = by_id.find(p.record_id);
    if (it == by_id.end()) throw UsageError("score_pairs: record '" + p.record_id + "' not in corpus");
    auto s = intern(it->second->target);
    auto a = intern(p.verdict_aut.extracted);
    auto n = intern(p.verdict_nt.extracted);
    idx.push_back({s, a, n});
  }
  if (pairs.empty()) return {};

  auto emb = scorer.embed(texts);
  auto sent = scorer.sentiment(texts);

  std::vector<MetricRow> rows;
  rows.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const auto& src = texts[idx[k].src];
    MetricRow r;
    r.record_id = p.record_id;
    r.model_id = p.model_id;
    r.rouge1_aut = rouge1_f1(src, p.verdict_aut.extracted);
    r.rouge1_nt = rouge1_f1(src, p.verdict_nt.extracted);
    r.rougeL_aut = rougeL_f1(src, p.verdict_aut.extracted);
    r.rougeL_nt = rougeL_f1(src, p.verdict_nt.extracted);
    r.cos_aut = cosine(emb[idx[k].src], emb[idx[k].aut]);
    r.cos_nt = cosine(emb[idx[k].src], emb[idx[k].nt]);
    r.cos_cross = cosine(emb[idx[k].aut], emb[idx[k].nt]);
    r.p_target = signed_polarity(sent[idx[k].src]);
    r.p_aut = signed_polarity(sent[idx[k].aut]);
    r.p_nt = signed_polarity(sent[idx[k].nt]);
    r.dpol_aut = polarity_change(r.p_target, r.p_aut);
    r.dpol_nt = polarity_change(r.p_target, r.p_nt);
    validate(r);
    rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.record_id, a.model_id) < std::tie(b.record_id, b.model_id);
  });
  return rows;
}

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out;
  csv::append_row(out, metric_columns());
  for (const auto& r : rows) {
    std::vector<std::string> f{r.record_id, r.model_id};
    for (double v : {r.rouge1_aut, r.rouge1_nt, r.rougeL_aut, r.rougeL_nt, r.cos_aut, r.cos_nt, r.cos_cross,
                     r.p_target, r.p_aut, r.p_nt, r.dpol_aut, r.dpol_nt}) {
      f.push_back(fmt::format("{}", v));
    }
    csv::append_row(out, f);
  }
  return out;
}

std::vector<MetricRow> parse_metrics_csv(std::string_view text) {
  auto table = csv::parse(text);
  std::vector<std::size_t> col;
  for (const auto& name : metric_columns()) {
    auto c = table.column(name);
    if (!c) throw SchemaError("metrics.csv: missing column '" + name + "'", 0, name);
    col.push_back(*c);
  }
  std::vector<MetricRow> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& t = table.rows[i];
    const auto& names = metric_columns();
    auto num = [&](std::size_t k) { return parse_double(t[col[k]], i + 1, names[k]); };
    MetricRow r{t[col[0]], t[col[1]], num(2), num(3), num(4), num(5), num(6), num(7),
                num(8),    num(9),    num(10), num(11), num(12), num(13)};
    validate(r);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace probe

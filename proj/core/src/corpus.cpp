#include "probe/corpus.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "probe/csv.hpp"
#include "probe/digest.hpp"
#include "probe/error.hpp"
#include "probe/io.hpp"
#include "probe/tokenize.hpp"

namespace probe {

using nlohmann::json;

namespace {

constexpr std::string_view kJustificationPrefix = "justification:";
const std::set<std::string, std::less<>> kReserved{"id", "preceding", "target", "following",
                                                   "agreement"};

std::optional<std::string> optional_text(std::string s) {
  if (trim(s).empty()) return std::nullopt;
  return s;
}

int parse_label(std::string_view cell, std::size_t row, const std::string& annotator) {
  auto t = trim(cell);
  if (t == "0") return 0;
  if (t == "1") return 1;
  throw ValidationError("row " + std::to_string(row) + ": label for annotator '" + annotator +
                        "' must be 0 or 1, got '" + t + "'");
}

void validate(std::vector<SentenceRecord>& records) {
  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (trim(r.target).empty()) {
      throw ValidationError("row " + std::to_string(i + 1) + " (id '" + r.id + "'): empty target");
    }
    if (!seen.insert(r.id).second) {
      throw ValidationError("row " + std::to_string(i + 1) + ": duplicate id '" + r.id + "'");
    }
  }
}

std::vector<SentenceRecord> parse_csv_corpus(std::string_view text) {
  auto table = csv::parse(text);
  std::vector<SentenceRecord> out;
  if (table.header.empty()) return out;
  auto id_col = table.column("id");
  auto target_col = table.column("target");
  if (!id_col) throw SchemaError("corpus header is missing required column 'id'", 0, "id");
  if (!target_col) throw SchemaError("corpus header is missing required column 'target'", 0, "target");
  auto pre_col = table.column("preceding");
  auto fol_col = table.column("following");

  std::vector<std::pair<std::size_t, std::string>> label_cols, just_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const auto& name = table.header[c];
    if (kReserved.contains(name)) continue;
    if (name.starts_with(kJustificationPrefix)) {
      just_cols.emplace_back(c, name.substr(kJustificationPrefix.size()));
    } else if (!name.empty()) {
      label_cols.emplace_back(c, name);
    }
  }

  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 1;
    SentenceRecord rec;
    rec.id = trim(row[*id_col]);
    if (rec.id.empty()) {
      throw SchemaError("row " + std::to_string(row_no) + ": missing required field 'id'", row_no, "id");
    }
    rec.target = row[*target_col];
    if (pre_col) rec.preceding = optional_text(row[*pre_col]);
    if (fol_col) rec.following = optional_text(row[*fol_col]);
    for (const auto& [c, annotator] : label_cols) {
      if (trim(row[c]).empty()) continue;
      rec.labels[annotator] = parse_label(row[c], row_no, annotator);
    }
    for (const auto& [c, annotator] : just_cols) {
      if (!trim(row[c]).empty()) rec.justifications[annotator] = row[c];
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<SentenceRecord> parse_jsonl_corpus(std::string_view text) {
  std::vector<SentenceRecord> out;
  std::size_t row_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (trim(line).empty()) continue;
    ++row_no;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError("row " + std::to_string(row_no) + ": invalid JSON: " + e.what(), row_no, "");
    }
    if (!obj.is_object()) throw SchemaError("row " + std::to_string(row_no) + ": not an object", row_no, "");
    auto require_string = [&](const char* key) -> std::string {
      if (!obj.contains(key) || !obj[key].is_string()) {
        throw SchemaError("row " + std::to_string(row_no) + ": missing required field '" + key + "'",
                          row_no, key);
      }
      return obj[key].get<std::string>();
    };
    SentenceRecord rec;
    rec.id = trim(require_string("id"));
    if (rec.id.empty()) {
      throw SchemaError("row " + std::to_string(row_no) + ": missing required field 'id'", row_no, "id");
    }
    rec.target = require_string("target");
    for (auto [key, slot] : {std::pair{"preceding", &rec.preceding}, std::pair{"following", &rec.following}}) {
      if (obj.contains(key) && obj[key].is_string()) *slot = optional_text(obj[key].get<std::string>());
    }
    if (obj.contains("labels")) {
      for (const auto& [annotator, v] : obj["labels"].items()) {
        if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
          rec.labels[annotator] = v.get<int>();
        } else if (v.is_string()) {
          rec.labels[annotator] = parse_label(v.get<std::string>(), row_no, annotator);
        } else if (!v.is_null()) {
          throw ValidationError("row " + std::to_string(row_no) + ": label for annotator '" + annotator +
                                "' must be 0 or 1");
        }
      }
    }
    if (obj.contains("justifications")) {
      for (const auto& [annotator, v] : obj["justifications"].items()) {
        if (v.is_string() && !trim(v.get<std::string>()).empty()) rec.justifications[annotator] = v.get<std::string>();
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

json to_json(const SentenceRecord& r) {
  json j;
  j["id"] = r.id;
  j["preceding"] = r.preceding ? json(*r.preceding) : json(nullptr);
  j["target"] = r.target;
  j["following"] = r.following ? json(*r.following) : json(nullptr);
  j["labels"] = json::object();
  for (const auto& [a, v] : r.labels) j["labels"][a] = v;
  j["justifications"] = json::object();
  for (const auto& [a, v] : r.justifications) j["justifications"][a] = v;
  return j;
}

}  // namespace

CorpusFormat corpus_format_for(const std::filesystem::path& path) {
  auto ext = to_lower_ascii(path.extension().string());
  if (ext == ".csv") return CorpusFormat::Csv;
  if (ext == ".jsonl" || ext == ".ndjson") return CorpusFormat::Jsonl;
  throw UsageError("cannot infer corpus format from '" + path.string() + "' (expected .csv or .jsonl)");
}

std::vector<SentenceRecord> parse_corpus(std::string_view text, CorpusFormat format) {
  auto records = format == CorpusFormat::Csv ? parse_csv_corpus(text) : parse_jsonl_corpus(text);
  validate(records);
  return records;
}

std::vector<SentenceRecord> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw UsageError("corpus file not found: " + path.string());
  return parse_corpus(read_text_file(path), format);
}

std::vector<SentenceRecord> load_corpus(const std::filesystem::path& path) {
  return load_corpus(path, corpus_format_for(path));
}

std::string serialize_corpus(std::span<const SentenceRecord> records, CorpusFormat format) {
  std::string out;
  if (format == CorpusFormat::Jsonl) {
    for (const auto& r : records) {
      out += canonical_json(to_json(r));
      out.push_back('\n');
    }
    return out;
  }
  std::set<std::string> annotators, justifiers;
  for (const auto& r : records) {
    for (const auto& [a, _] : r.labels) annotators.insert(a);
    for (const auto& [a, _] : r.justifications) justifiers.insert(a);
  }
  std::vector<std::string> header{"id", "preceding", "target", "following"};
  header.insert(header.end(), annotators.begin(), annotators.end());
  for (const auto& a : justifiers) header.push_back(std::string(kJustificationPrefix) + a);
  csv::append_row(out, header);
  for (const auto& r : records) {
    std::vector<std::string> row{r.id, r.preceding.value_or(""), r.target, r.following.value_or("")};
    for (const auto& a : annotators) {
      auto it = r.labels.find(a);
      row.push_back(it == r.labels.end() ? "" : std::to_string(it->second));
    }
    for (const auto& a : justifiers) {
      auto it = r.justifications.find(a);
      row.push_back(it == r.justifications.end() ? "" : it->second);
    }
    csv::append_row(out, row);
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, std::span<const SentenceRecord> records,
                 CorpusFormat format) {
  write_file_atomic(path, serialize_corpus(records, format));
}

std::string corpus_hash(std::span<const SentenceRecord> records) {
  json arr = json::array();
  for (const auto& r : records) arr.push_back(to_json(r));
  return digest_json(arr);
}

std::map<std::string, double> load_scores(const std::filesystem::path& path, const std::string& column) {
  auto table = csv::read_file(path.string());
  auto id_col = table.column("id");
  auto score_col = table.column(column);
  if (!id_col) throw SchemaError("scores file is missing column 'id'", 0, "id");
  if (!score_col) throw SchemaError("scores file is missing column '" + column + "'", 0, column);
  std::map<std::string, double> scores;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto cell = trim(table.rows[r][*score_col]);
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size()) {
      throw SchemaError("row " + std::to_string(r + 1) + ": score '" + cell + "' is not a number", r + 1, column);
    }
    scores[trim(table.rows[r][*id_col])] = v;
  }
  return scores;
}

double pairwise_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw UsageError("pairwise_kappa: label vectors differ in length");
  if (a.size() < 2) throw UsageError("pairwise_kappa: need at least two labelled items");
  std::size_t n = a.size(), agree = 0, a_pos = 0, b_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if ((a[i] != 0 && a[i] != 1) || (b[i] != 0 && b[i] != 1)) {
      throw UsageError("pairwise_kappa: labels must be binary");
    }
    agree += a[i] == b[i];
    a_pos += a[i];
    b_pos += b[i];
  }
  const bool chance_certain = (a_pos == n && b_pos == n) || (a_pos == 0 && b_pos == 0);
  if (chance_certain) {
    throw DegenerateError("kappa is undefined: both raters assign a single identical class (p_e = 1)");
  }
  const double nn = static_cast<double>(n);
  const double p_o = static_cast<double>(agree) / nn;
  const double pa = static_cast<double>(a_pos) / nn, pb = static_cast<double>(b_pos) / nn;
  const double p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
  return (p_o - p_e) / (1.0 - p_e);
}

AgreementBands stratify_by_agreement(std::span<const SentenceRecord> records,
                                     const std::map<std::string, double>& scores, std::size_t band_size) {
  if (band_size == 0) throw UsageError("stratify_by_agreement: band size must be positive");
  if (3 * band_size > records.size()) {
    throw UsageError("stratify_by_agreement: need at least " + std::to_string(3 * band_size) +
                     " records for three bands of " + std::to_string(band_size) + ", got " +
                     std::to_string(records.size()));
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> score(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = scores.find(records[i].id);
    if (it == scores.end()) throw UsageError("stratify_by_agreement: no score for record '" + records[i].id + "'");
    score[i] = it->second;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (score[x] != score[y]) return score[x] > score[y];
    return records[x].id < records[y].id;
  });
  auto slice = [&](std::size_t begin) {
    std::vector<SentenceRecord> band;
    band.reserve(band_size);
    for (std::size_t k = begin; k < begin + band_size; ++k) band.push_back(records[order[k]]);
    return band;
  };
  const std::size_t n = records.size();
  // With 3*band <= n the centred window never overlaps the top or bottom band.
  return {slice(0), slice((n - band_size) / 2), slice(n - band_size)};
}

}  // namespace probe

#include "probe/qual.hpp"

#include <algorithm>
#include <thread>

#include <spdlog/spdlog.h>

#include "probe/csv.hpp"
#include "probe/digest.hpp"
#include "probe/error.hpp"
#include "probe/io.hpp"
#include "probe/tokenize.hpp"

namespace probe::qual {

const std::string_view kCodebookFooter = R"(

Formatting note: after your document, repeat your final codebook inside a fenced block labelled codebook, one category per line, fields separated by " | ":
```codebook
category | abbreviation | definition | verbatim example
```)";

const std::string_view kCodesFooter = R"(

Formatting note: after your table, repeat it inside a fenced block labelled codes with one line per theme (Focus, Identity, Impact, Intent, Stereotypes, Tone, Wording, then any Emergent rows), fields separated by " | ". Use "-" for fields that do not apply.
```codes
theme | Present or Not Present | verbatim quote | code label | High, Medium or Low
```)";

namespace {

std::string lower_compact(std::string_view s) {
  std::string out;
  for (char c : to_lower_ascii(s)) {
    if (c != ' ' && c != '_' && c != '-') out += c;
  }
  return out;
}

// Lines of the last fenced block whose info string is `label`; nullopt if
// there is none. An unterminated block runs to the end of the text.
std::optional<std::vector<std::string>> fenced_block(std::string_view text, std::string_view label) {
  std::string open = "```" + std::string(label);
  std::size_t pos = std::string_view::npos;
  for (auto p = text.find(open); p != std::string_view::npos; p = text.find(open, p + 1)) {
    auto after = p + open.size();
    if (after == text.size() || text[after] == '\n' || text[after] == '\r' || text[after] == ' ') pos = p;
  }
  if (pos == std::string_view::npos) return std::nullopt;
  auto nl = text.find('\n', pos);
  if (nl == std::string_view::npos) return std::vector<std::string>{};
  std::vector<std::string> lines;
  for (auto start = nl + 1; start < text.size();) {
    auto end = text.find('\n', start);
    auto line = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (line.starts_with("```")) break;
    lines.push_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return lines;
}

bool is_separator(const std::string& line) {
  return line.find_first_not_of("|-: ") == std::string::npos;
}

std::vector<std::string> cells(const std::string& line) {
  std::string_view s = line;
  if (s.starts_with('|')) s.remove_prefix(1);
  if (s.ends_with('|')) s.remove_suffix(1);
  std::vector<std::string> out;
  for (std::size_t start = 0;;) {
    auto bar = s.find('|', start);
    out.push_back(trim(s.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start)));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& v, std::size_t from, std::size_t to, std::string_view sep) {
  std::string out;
  for (auto i = from; i < to; ++i) {
    if (i > from) out += sep;
    out += v[i];
  }
  return out;
}

std::optional<std::string> field(const std::string& s) {
  auto t = trim(s);
  if (t.empty() || t == "-" || t == "—" || lower_compact(t) == "n/a" || lower_compact(t) == "na") return std::nullopt;
  if (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') || (t.front() == '\'' && t.back() == '\''))) {
    t = trim(t.substr(1, t.size() - 2));
  }
  return t;
}

std::optional<Theme> parse_theme(const std::string& s) {
  auto l = lower_compact(s);
  for (auto t : {Theme::Focus, Theme::Identity, Theme::Impact, Theme::Intent, Theme::Stereotypes, Theme::Tone,
                 Theme::Wording}) {
    if (l == lower_compact(to_string(t))) return t;
  }
  if (l.starts_with("emergent")) return Theme::Emergent;
  return std::nullopt;
}

std::optional<ThemeStatus> parse_status(const std::string& s) {
  auto l = lower_compact(s);
  if (l == "present") return ThemeStatus::Present;
  if (l == "notpresent" || l == "absent") return ThemeStatus::NotPresent;
  return std::nullopt;
}

std::optional<Confidence> parse_confidence(const std::string& s) {
  auto l = lower_compact(s);
  if (l == "high") return Confidence::High;
  if (l == "medium") return Confidence::Medium;
  if (l == "low") return Confidence::Low;
  return std::nullopt;
}

std::string safe_name(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_') c = '_';
  }
  return out;
}

// Rethrows a gateway failure with the agent id prepended, keeping its type.
[[noreturn]] void rethrow_for(const std::string& agent_id) {
  try {
    throw;
  } catch (const TransportError& e) {
    throw TransportError("agent " + agent_id + ": " + e.what(), e.endpoint());
  } catch (const UpstreamError& e) {
    throw UpstreamError("agent " + agent_id + ": " + e.what(), e.status());
  } catch (const ProtocolError& e) {
    throw ProtocolError("agent " + agent_id + ": " + e.what());
  }
}

std::string chat_as(GatewayPool& pool, const AgentSpec& agent, const std::vector<ChatMessage>& messages) {
  try {
    return pool.get(agent.model).chat(messages).text;
  } catch (const Error&) {
    rethrow_for(agent.agent_id);
  }
}

std::vector<ChatMessage> opening(const RenderedPrompt& p, std::string_view footer) {
  std::vector<ChatMessage> msgs;
  if (p.system) msgs.push_back({"system", *p.system});
  msgs.push_back({"user", p.user + std::string(footer)});
  return msgs;
}

void check_agents(const std::vector<AgentSpec>& coders, const AgentSpec& synthesizer, Role coder_role) {
  if (coders.empty()) throw UsageError("qualitative protocol needs at least one coder");
  std::vector<std::string> ids;
  for (const auto& c : coders) {
    if (c.role != coder_role) {
      throw ValidationError("agent " + c.agent_id + " has role " + std::string(to_string(c.role)) + ", expected " +
                            std::string(to_string(coder_role)));
    }
    ids.push_back(c.agent_id);
  }
  if (synthesizer.role != Role::Synthesizer) {
    throw ValidationError("agent " + synthesizer.agent_id + " is not a Synthesizer");
  }
  ids.push_back(synthesizer.agent_id);
  std::sort(ids.begin(), ids.end());
  if (auto d = std::adjacent_find(ids.begin(), ids.end()); d != ids.end()) {
    throw ValidationError("duplicate agent id '" + *d + "'");
  }
}

}  // namespace

std::string_view to_string(DocKind k) {
  switch (k) {
    case DocKind::Reflexivity: return "Reflexivity";
    case DocKind::RewriteAnalysis: return "RewriteAnalysis";
    case DocKind::ReasoningAnalysis: return "ReasoningAnalysis";
    case DocKind::InductiveSynthesis: return "InductiveSynthesis";
    case DocKind::FrameworkReview: return "FrameworkReview";
    case DocKind::DocumentCoding: return "DocumentCoding";
    case DocKind::DeductiveSynthesis: return "DeductiveSynthesis";
    case DocKind::CrossSynthesis: return "CrossSynthesis";
  }
  return "?";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::InductiveCoder: return "InductiveCoder";
    case Role::DeductiveCoder: return "DeductiveCoder";
    case Role::Synthesizer: return "Synthesizer";
  }
  return "?";
}

std::string_view to_string(Theme t) {
  switch (t) {
    case Theme::Focus: return "Focus";
    case Theme::Identity: return "Identity";
    case Theme::Impact: return "Impact";
    case Theme::Intent: return "Intent";
    case Theme::Stereotypes: return "Stereotypes";
    case Theme::Tone: return "Tone";
    case Theme::Wording: return "Wording";
    case Theme::Emergent: return "Emergent";
  }
  return "?";
}

std::string_view to_string(ThemeStatus s) { return s == ThemeStatus::Present ? "Present" : "NotPresent"; }

std::string_view to_string(Confidence c) {
  switch (c) {
    case Confidence::High: return "High";
    case Confidence::Medium: return "Medium";
    case Confidence::Low: return "Low";
  }
  return "?";
}

const std::vector<Theme>& framework_themes() {
  static const std::vector<Theme> themes{Theme::Focus,       Theme::Identity, Theme::Impact, Theme::Intent,
                                         Theme::Stereotypes, Theme::Tone,     Theme::Wording};
  return themes;
}

void validate(const ThemeCode& c) {
  auto where = c.document_id + "/" + std::string(to_string(c.theme));
  if (c.status == ThemeStatus::Present) {
    if (!c.quote || c.quote->empty()) throw ValidationError(where + ": Present without quote");
    if (!c.code_label || c.code_label->empty()) throw ValidationError(where + ": Present without code label");
    if (!c.confidence) throw ValidationError(where + ": Present without confidence");
  } else if (c.quote || c.code_label || c.confidence) {
    throw ValidationError(where + ": NotPresent row carries quote, label or confidence");
  }
}

std::string AnalysisDocument::file_stem() const {
  auto stem = safe_name(agent_id) + "_" + std::string(to_string(kind));
  if (!subject.empty()) stem += "_" + safe_name(subject);
  return stem;
}

nlohmann::json AnalysisDocument::sidecar() const {
  nlohmann::json j = {{"agent_id", agent_id},
                      {"kind", to_string(kind)},
                      {"subject", subject},
                      {"raw_sha256", sha256_hex(raw_text)},
                      {"warnings", warnings},
                      {"codebook", nullptr},
                      {"codes", nullptr}};
  if (codebook) {
    j["codebook"] = nlohmann::json::array();
    for (const auto& e : *codebook) {
      j["codebook"].push_back(
          {{"category", e.category}, {"abbrev", e.abbrev}, {"definition", e.definition}, {"example", e.example}});
    }
  }
  if (codes) {
    j["codes"] = nlohmann::json::array();
    for (const auto& c : *codes) {
      j["codes"].push_back({{"document_id", c.document_id},
                            {"theme", to_string(c.theme)},
                            {"status", to_string(c.status)},
                            {"quote", c.quote ? nlohmann::json(*c.quote) : nlohmann::json()},
                            {"code_label", c.code_label ? nlohmann::json(*c.code_label) : nlohmann::json()},
                            {"confidence", c.confidence ? nlohmann::json(to_string(*c.confidence)) : nlohmann::json()}});
    }
  }
  return j;
}

ParsedCodebook parse_codebook(std::string_view text) {
  ParsedCodebook out;
  auto block = fenced_block(text, "codebook");
  if (!block) {
    out.warnings.push_back("no codebook block found; raw text kept");
    return out;
  }
  std::vector<CodebookEntry> entries;
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < block->size(); ++i) {
    const auto& line = (*block)[i];
    if (line.empty() || is_separator(line)) continue;
    auto c = cells(line);
    if (lower_compact(c[0]) == "category") continue;
    if (c.size() < 4) {
      out.warnings.push_back("codebook row " + std::to_string(i + 1) + " has fewer than 4 fields; skipped");
      continue;
    }
    CodebookEntry e{c[0], c[1], c[2], join(c, 3, c.size(), " | ")};
    if (auto ex = field(e.example)) e.example = *ex;
    if (e.category.empty() || e.abbrev.empty() || e.example.empty() || e.example == "-") {
      out.warnings.push_back("codebook row " + std::to_string(i + 1) + " lacks category, abbreviation or example; skipped");
      continue;
    }
    if (int n = ++seen[e.abbrev]; n > 1) {
      auto renamed = e.abbrev + "-" + std::to_string(n);
      out.warnings.push_back("duplicate abbreviation " + e.abbrev + " renamed " + renamed);
      e.abbrev = renamed;
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) {
    out.warnings.push_back("codebook block has no valid rows; raw text kept");
    return out;
  }
  out.entries = std::move(entries);
  return out;
}

ParsedCodes parse_theme_codes(std::string_view text, const std::string& agent_id, const std::string& document_id) {
  ParsedCodes out;
  auto block = fenced_block(text, "codes");
  if (!block) {
    out.warnings.push_back("no codes block found; raw text kept");
    return out;
  }
  std::vector<ThemeCode> codes;
  for (std::size_t i = 0; i < block->size(); ++i) {
    const auto& line = (*block)[i];
    if (line.empty() || is_separator(line)) continue;
    auto c = cells(line);
    if (lower_compact(c[0]) == "theme") continue;
    auto row = "codes row " + std::to_string(i + 1);
    if (c.size() < 5) {
      out.warnings.push_back(row + " has fewer than 5 fields; rejected");
      continue;
    }
    auto theme = parse_theme(c[0]);
    auto status = parse_status(c[1]);
    if (!theme || !status) {
      out.warnings.push_back(row + ": unknown theme or status; rejected");
      continue;
    }
    ThemeCode code{agent_id, document_id, *theme, *status, field(join(c, 2, c.size() - 2, " | ")),
                   field(c[c.size() - 2]), std::nullopt};
    if (auto conf = field(c.back())) {
      code.confidence = parse_confidence(*conf);
      if (!code.confidence) {
        out.warnings.push_back(row + ": unknown confidence '" + *conf + "'; rejected");
        continue;
      }
    }
    try {
      validate(code);
    } catch (const ValidationError& e) {
      out.warnings.push_back(row + " rejected: " + e.what());
      continue;
    }
    codes.push_back(std::move(code));
  }
  for (auto t : framework_themes()) {
    if (std::none_of(codes.begin(), codes.end(), [&](const ThemeCode& c) { return c.theme == t; })) {
      out.warnings.push_back("no accepted row for theme " + std::string(to_string(t)));
    }
  }
  if (codes.empty()) {
    out.warnings.push_back("codes block has no valid rows; raw text kept");
    return out;
  }
  out.codes = std::move(codes);
  return out;
}

ChatGateway& GatewayPool::get(const ModelConfig& config) {
  std::lock_guard lock(mu_);
  auto& g = gateways_[config.model_id];
  if (!g) g = std::make_unique<ChatGateway>(config, options_);
  return *g;
}

void GatewayPool::flush() {
  std::lock_guard lock(mu_);
  for (auto& [_, g] : gateways_) g->flush_cache();
}

void DocumentStore::add(AnalysisDocument doc) {
  for (const auto& w : doc.warnings) spdlog::warn("{}: {}", doc.file_stem(), w);
  std::lock_guard lock(mu_);
  docs_.push_back(std::move(doc));
}

std::vector<AnalysisDocument> DocumentStore::documents() const {
  std::lock_guard lock(mu_);
  auto out = docs_;
  // Insertion order is only stable per agent, so order by protocol position.
  std::stable_sort(out.begin(), out.end(), [](const AnalysisDocument& a, const AnalysisDocument& b) {
    return std::tie(a.kind, a.agent_id) < std::tie(b.kind, b.agent_id);
  });
  return out;
}

std::optional<AnalysisDocument> DocumentStore::find(const std::string& agent_id, DocKind kind) const {
  std::lock_guard lock(mu_);
  for (const auto& d : docs_) {
    if (d.agent_id == agent_id && d.kind == kind) return d;
  }
  return std::nullopt;
}

std::size_t DocumentStore::count(const std::string& agent_id, DocKind kind) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(
      docs_.begin(), docs_.end(), [&](const AnalysisDocument& d) { return d.agent_id == agent_id && d.kind == kind; }));
}

// ---- inductive ----

InductiveProtocol::InductiveProtocol(std::vector<AgentSpec> coders, AgentSpec synthesizer, GatewayPool& gateways,
                                     QualOptions options, const TemplateSet& templates)
    : synthesizer_(std::move(synthesizer)), gateways_(gateways), options_(std::move(options)), templates_(templates) {
  check_agents(coders, synthesizer_, Role::InductiveCoder);
  for (auto& c : coders) {
    auto coder = std::make_unique<Coder>();
    coder->spec = std::move(c);
    coders_.push_back(std::move(coder));
  }
}

InductiveProtocol::Coder& InductiveProtocol::coder(const std::string& agent_id) {
  for (auto& c : coders_) {
    if (c->spec.agent_id == agent_id) return *c;
  }
  throw UsageError("unknown inductive coder '" + agent_id + "'");
}

std::string InductiveProtocol::ask(Coder& c, AgentPhase phase, std::map<std::string, Binding, std::less<>> bindings,
                                   bool footer) {
  bindings["agent_name"] = Binding{c.spec.agent_id, false};
  auto prompt = render_agent(phase, bindings, templates_);
  std::vector<ChatMessage> msgs = c.history;
  if (msgs.empty() && prompt.system) msgs.push_back({"system", *prompt.system});
  msgs.push_back({"user", prompt.user + std::string(footer && options_.structured_footer ? kCodebookFooter : "")});
  auto reply = chat_as(gateways_, c.spec, msgs);
  msgs.push_back({"assistant", reply});
  c.history = std::move(msgs);
  return reply;
}

AnalysisDocument InductiveProtocol::run_reflexivity(const std::string& agent_id) {
  auto& c = coder(agent_id);
  std::lock_guard lock(c.mu);
  if (store_.count(agent_id, DocKind::Reflexivity) > 0) {
    throw ProtocolOrderError("agent " + agent_id + ": reflexivity statement already written");
  }
  AnalysisDocument doc{agent_id, DocKind::Reflexivity, "", ask(c, AgentPhase::Reflexivity, {}, false), {}, {}, {}};
  store_.add(doc);
  return doc;
}

AnalysisDocument InductiveProtocol::run_inductive(const std::string& agent_id, DocKind kind, const std::string& data) {
  if (kind != DocKind::RewriteAnalysis && kind != DocKind::ReasoningAnalysis) {
    throw UsageError("run_inductive: kind must be RewriteAnalysis or ReasoningAnalysis");
  }
  auto& c = coder(agent_id);
  std::lock_guard lock(c.mu);
  if (store_.count(agent_id, DocKind::Reflexivity) == 0) {
    throw ProtocolOrderError("agent " + agent_id + ": " + std::string(to_string(kind)) +
                             " requested before the reflexivity statement");
  }
  if (store_.count(agent_id, kind) > 0) {
    throw ProtocolOrderError("agent " + agent_id + ": " + std::string(to_string(kind)) + " already written");
  }
  auto phase = kind == DocKind::RewriteAnalysis ? AgentPhase::InductiveRewrite : AgentPhase::InductiveReasoning;
  auto raw = ask(c, phase, {{"data", Binding{data, true}}}, true);
  auto parsed = parse_codebook(raw);
  AnalysisDocument doc{agent_id, kind, "", raw, parsed.entries, {}, parsed.warnings};
  store_.add(doc);
  return doc;
}

RenderedPrompt InductiveProtocol::synthesis_prompt() const {
  std::string blocks;
  for (const auto& c : coders_) {
    const auto& id = c->spec.agent_id;
    if (!blocks.empty()) blocks += "\n";
    blocks += "=== " + id + " ===\n";
    for (auto kind : {DocKind::Reflexivity, DocKind::RewriteAnalysis, DocKind::ReasoningAnalysis}) {
      auto d = store_.find(id, kind);
      if (!d) {
        throw ProtocolOrderError("agent " + id + ": synthesis requested before its " + std::string(to_string(kind)));
      }
      blocks += "[" + d->file_stem() + "]\n" + d->raw_text + "\n";
    }
  }
  return render_agent(AgentPhase::InductiveSynthesis, {{"agent_blocks", Binding{blocks, true}}}, templates_);
}

AnalysisDocument InductiveProtocol::synthesize() {
  if (coders_.size() < 2) throw UsageError("synthesis needs documents from at least 2 coders");
  if (store_.count(synthesizer_.agent_id, DocKind::InductiveSynthesis) > 0) {
    throw ProtocolOrderError("inductive synthesis already written");
  }
  auto prompt = synthesis_prompt();
  auto raw = chat_as(gateways_, synthesizer_, opening(prompt, options_.structured_footer ? kCodebookFooter : ""));
  auto parsed = parse_codebook(raw);
  AnalysisDocument doc{synthesizer_.agent_id, DocKind::InductiveSynthesis, "", raw, parsed.entries, {},
                       parsed.warnings};
  store_.add(doc);
  return doc;
}

void InductiveProtocol::run(const std::string& rewrite_data, const std::string& reasoning_data) {
  std::vector<std::exception_ptr> errors(coders_.size());
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < coders_.size(); ++i) {
      threads.emplace_back([&, i] {
        try {
          const auto& id = coders_[i]->spec.agent_id;
          run_reflexivity(id);
          run_inductive(id, DocKind::RewriteAnalysis, rewrite_data);
          run_inductive(id, DocKind::ReasoningAnalysis, reasoning_data);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  synthesize();
  gateways_.flush();
}

// ---- deductive ----

DeductiveProtocol::DeductiveProtocol(std::vector<AgentSpec> coders, AgentSpec synthesizer, GatewayPool& gateways,
                                     QualOptions options, const TemplateSet& templates)
    : synthesizer_(std::move(synthesizer)), gateways_(gateways), options_(std::move(options)), templates_(templates) {
  check_agents(coders, synthesizer_, Role::DeductiveCoder);
  for (auto& c : coders) {
    auto coder = std::make_unique<Coder>();
    coder->spec = std::move(c);
    coders_.push_back(std::move(coder));
  }
}

DeductiveProtocol::Coder& DeductiveProtocol::coder(const std::string& agent_id) {
  for (auto& c : coders_) {
    if (c->spec.agent_id == agent_id) return *c;
  }
  throw UsageError("unknown deductive coder '" + agent_id + "'");
}

AnalysisDocument DeductiveProtocol::review(const std::string& agent_id) {
  auto& c = coder(agent_id);
  std::lock_guard lock(c.mu);
  if (!c.framework.empty()) throw ProtocolOrderError("agent " + agent_id + ": framework already reviewed");
  auto prompt = render_agent(AgentPhase::DeductiveReview, {{"agent_name", Binding{agent_id, false}}}, templates_);
  auto msgs = opening(prompt, "");
  auto reply = chat_as(gateways_, c.spec, msgs);
  msgs.push_back({"assistant", reply});
  c.framework = std::move(msgs);
  AnalysisDocument doc{agent_id, DocKind::FrameworkReview, "", reply, {}, {}, {}};
  store_.add(doc);
  return doc;
}

AnalysisDocument DeductiveProtocol::code_document(const std::string& agent_id, const SourceDocument& src) {
  auto& c = coder(agent_id);
  std::lock_guard lock(c.mu);
  if (c.framework.empty()) {
    throw ProtocolOrderError("agent " + agent_id + ": document coding requested before framework review");
  }
  if (c.synthesized) throw ProtocolOrderError("agent " + agent_id + ": document coding after within-model synthesis");
  if (std::find(c.coded.begin(), c.coded.end(), src.id) != c.coded.end()) {
    throw UsageError("agent " + agent_id + ": document " + src.id + " already coded");
  }
  auto prompt = render_agent(AgentPhase::DeductiveCode,
                             {{"agent_name", Binding{agent_id, false}},
                              {"document_id", Binding{src.id, false}},
                              {"document_text", Binding{src.text, true}}},
                             templates_);
  auto msgs = c.framework;
  msgs.push_back({"user", prompt.user + std::string(options_.structured_footer ? kCodesFooter : "")});
  auto raw = chat_as(gateways_, c.spec, msgs);
  auto parsed = parse_theme_codes(raw, agent_id, src.id);
  c.coded.push_back(src.id);
  AnalysisDocument doc{agent_id, DocKind::DocumentCoding, src.id, raw, {}, parsed.codes, parsed.warnings};
  store_.add(doc);
  return doc;
}

AnalysisDocument DeductiveProtocol::within_synthesis(const std::string& agent_id) {
  auto& c = coder(agent_id);
  std::lock_guard lock(c.mu);
  if (c.coded.empty()) throw ProtocolOrderError("agent " + agent_id + ": within-model synthesis before any coding");
  if (c.synthesized) throw ProtocolOrderError("agent " + agent_id + ": within-model synthesis already written");
  std::string data;
  for (const auto& d : store_.documents()) {
    if (d.agent_id != agent_id || d.kind != DocKind::DocumentCoding) continue;
    if (!data.empty()) data += "\n";
    data += "[DOCUMENT ID: " + d.subject + "]\n" + d.raw_text + "\n";
  }
  auto prompt = render_agent(AgentPhase::DeductiveWithinSynthesis,
                             {{"agent_name", Binding{agent_id, false}},
                              {"n_documents", Binding{std::to_string(c.coded.size()), false}},
                              {"data", Binding{data, true}}},
                             templates_);
  auto msgs = c.framework;
  msgs.push_back({"user", prompt.user});
  auto raw = chat_as(gateways_, c.spec, msgs);
  c.synthesized = true;
  AnalysisDocument doc{agent_id, DocKind::DeductiveSynthesis, "", raw, {}, {}, {}};
  store_.add(doc);
  return doc;
}

AnalysisDocument DeductiveProtocol::cross_synthesis() {
  if (coders_.size() < 2) throw UsageError("cross-model synthesis needs documents from at least 2 coders");
  if (store_.count(synthesizer_.agent_id, DocKind::CrossSynthesis) > 0) {
    throw ProtocolOrderError("cross-model synthesis already written");
  }
  std::string attachments;
  for (const auto& c : coders_) {
    auto d = store_.find(c->spec.agent_id, DocKind::DeductiveSynthesis);
    if (!d) {
      throw ProtocolOrderError("agent " + c->spec.agent_id + ": cross-model synthesis before its deductive synthesis");
    }
    if (!attachments.empty()) attachments += "\n";
    attachments += "=== " + safe_name(c->spec.agent_id) + "_deductive_synthesis ===\n" + d->raw_text + "\n";
  }
  auto prompt = render_agent(AgentPhase::DeductiveCrossSynthesis, {{"attachments", Binding{attachments, true}}},
                             templates_);
  auto raw = chat_as(gateways_, synthesizer_, opening(prompt, ""));
  AnalysisDocument doc{synthesizer_.agent_id, DocKind::CrossSynthesis, "", raw, {}, {}, {}};
  store_.add(doc);
  return doc;
}

void DeductiveProtocol::run(const std::vector<SourceDocument>& docs) {
  std::vector<std::exception_ptr> errors(coders_.size());
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < coders_.size(); ++i) {
      threads.emplace_back([&, i] {
        try {
          const auto& id = coders_[i]->spec.agent_id;
          review(id);
          for (const auto& d : docs) code_document(id, d);
          within_synthesis(id);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  cross_synthesis();
  gateways_.flush();
}

std::vector<ThemeCode> DeductiveProtocol::theme_codes() const {
  std::vector<ThemeCode> out;
  for (const auto& c : coders_) {
    for (const auto& d : store_.documents()) {
      if (d.agent_id != c->spec.agent_id || d.kind != DocKind::DocumentCoding || !d.codes) continue;
      out.insert(out.end(), d.codes->begin(), d.codes->end());
    }
  }
  return out;
}

void write_documents(const std::filesystem::path& dir, const std::vector<AnalysisDocument>& docs) {
  for (const auto& d : docs) {
    write_file_atomic(dir / (d.file_stem() + ".md"), d.raw_text);
    write_file_atomic(dir / (d.file_stem() + ".json"), d.sidecar().dump(2) + "\n");
  }
}

std::string format_theme_codes_csv(const std::vector<ThemeCode>& codes) {
  std::string out;
  csv::append_row(out, std::vector<std::string>{"agent_id", "document_id", "theme", "status", "quote", "code_label",
                                                "confidence"});
  for (const auto& c : codes) {
    csv::append_row(out, std::vector<std::string>{c.agent_id, c.document_id, std::string(to_string(c.theme)),
                                                  std::string(to_string(c.status)), c.quote.value_or(""),
                                                  c.code_label.value_or(""),
                                                  c.confidence ? std::string(to_string(*c.confidence)) : ""});
  }
  return out;
}

}  // namespace probe::qual

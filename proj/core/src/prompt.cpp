#include "probe/prompt.hpp"

#include <algorithm>
#include <cctype>

#include "probe/error.hpp"

namespace probe {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

// If text[pos] opens a placeholder, returns the length of the name.
std::size_t placeholder_at(std::string_view text, std::size_t pos) {
  if (text[pos] != '{' || pos + 1 >= text.size() || !ident_start(text[pos + 1])) return 0;
  std::size_t end = pos + 1;
  while (end < text.size() && ident_char(text[end])) ++end;
  if (end >= text.size() || text[end] != '}') return 0;
  return end - pos - 1;
}

// Removes every sentence that starts with "Save " and ends with ".xlsx.",
// together with the separator that preceded it.
std::string strip_save_instruction(std::string text) {
  const std::string_view suffix = ".xlsx.";
  std::size_t from = 0;
  while (true) {
    auto start = text.find("Save ", from);
    if (start == std::string::npos) break;
    auto end = text.find(suffix, start);
    auto nl = text.find('\n', start);
    if (end == std::string::npos || (nl != std::string::npos && nl < end)) {
      from = start + 1;
      continue;
    }
    end += suffix.size();
    auto cut = start;
    while (cut > 0 && text[cut - 1] == ' ') --cut;
    if (cut > 0 && text[cut - 1] == '\n') {
      // Sentence was its own paragraph: also drop the blank line after it.
      while (end < text.size() && text[end] == '\n') ++end;
    }
    text.erase(cut, end - cut);
    from = cut;
  }
  return text;
}

std::string format_examples(std::span<const IclExample> examples) {
  std::string out;
  for (const auto& e : examples) {
    if (!out.empty()) out += '\n';
    out += "Sentence: " + e.text + " → Label: " + std::to_string(e.label);
  }
  return out;
}

struct Token {
  std::size_t begin;
  std::size_t end;
};

std::vector<Token> whitespace_tokens(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    auto b = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    out.push_back({b, i});
  }
  return out;
}

}  // namespace

std::string substitute(std::string_view text, const std::map<std::string, Binding, std::less<>>& bindings,
                       std::vector<TextSpan>* record_spans) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    auto len = placeholder_at(text, i);
    if (len == 0) {
      out += text[i++];
      continue;
    }
    auto name = text.substr(i + 1, len);
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw RenderError("unbound placeholder {" + std::string(name) + "}", std::string(name));
    }
    auto begin = out.size();
    out += it->second.value;
    if (record_spans && it->second.from_record && out.size() > begin) record_spans->push_back({begin, out.size()});
    i += len + 2;
  }
  return out;
}

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto len = placeholder_at(text, i);
    if (len == 0) continue;
    std::string name(text.substr(i + 1, len));
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
    i += len + 1;
  }
  return out;
}

RenderedPrompt render(const SentenceRecord& record, Condition condition, std::optional<Persona> persona,
                      std::span<const IclExample> examples, const RenderOptions& options,
                      const TemplateSet& templates) {
  if (is_rewrite(condition)) {
    if (!persona) throw UsageError(std::string(to_string(condition)) + " requires a persona");
    if (rewrite_condition(*persona) != condition) {
      throw UsageError("persona " + std::string(to_string(*persona)) + " does not match condition " +
                       std::string(to_string(condition)));
    }
  } else if (persona) {
    throw UsageError("persona supplied for non-rewrite condition " + std::string(to_string(condition)));
  }
  if (is_icl(condition) && examples.empty()) {
    throw UsageError(std::string(to_string(condition)) + " requires a non-empty example list");
  }

  const auto& tmpl = templates.get(condition);
  std::map<std::string, Binding, std::less<>> b;
  auto context = [](const std::optional<std::string>& s) {
    return s ? Binding{*s, true} : Binding{std::string(kAbsentContext), false};
  };
  b["preceding_sentence"] = context(record.preceding);
  b["target_sentence"] = Binding{record.target, true};
  b["following_sentence"] = context(record.following);
  b["model"] = Binding{options.model_id, false};
  if (!examples.empty()) b["examples"] = Binding{format_examples(examples), false};
  if (persona) {
    auto key = *persona == Persona::Autistic ? "PersonaClause-Autistic" : "PersonaClause-Neurotypical";
    b["persona-clause"] = Binding{templates.fragment(key), false};
  }

  RenderedPrompt out;
  auto body = options.keep_save_instruction ? tmpl.user_text : strip_save_instruction(tmpl.user_text);
  out.user = substitute(body, b, &out.record_spans);
  out.system = tmpl.system_text;
  out.template_key = tmpl.key;
  out.condition = condition;
  out.persona = persona;
  out.record_id = record.id;
  return out;
}

RenderedPrompt render_agent(AgentPhase phase, const std::map<std::string, Binding, std::less<>>& bindings,
                            const TemplateSet& templates) {
  const auto& tmpl = templates.get(phase);
  RenderedPrompt out;
  out.user = substitute(tmpl.user_text, bindings, &out.record_spans);
  if (tmpl.system_text) out.system = substitute(*tmpl.system_text, bindings);
  out.template_key = tmpl.key;
  return out;
}

std::vector<DiffSpan> persona_diff(const RenderedPrompt& a, const RenderedPrompt& b) {
  if (a.record_id != b.record_id) {
    throw UsageError("persona_diff: record ids differ ('" + a.record_id + "' vs '" + b.record_id + "')");
  }
  if (!a.condition || !b.condition || !is_rewrite(*a.condition) || !is_rewrite(*b.condition)) {
    throw UsageError("persona_diff: both prompts must be rewrite conditions");
  }
  auto ta = whitespace_tokens(a.user);
  auto tb = whitespace_tokens(b.user);
  auto tok = [](const std::string& s, Token t) { return std::string_view(s).substr(t.begin, t.end - t.begin); };

  // Suffix LCS table; walking it forwards gives a leftmost-preferring script.
  const auto n = ta.size(), m = tb.size();
  std::vector<std::vector<std::uint32_t>> lcs(n + 1, std::vector<std::uint32_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      lcs[i][j] = tok(a.user, ta[i]) == tok(b.user, tb[j]) ? lcs[i + 1][j + 1] + 1
                                                            : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }

  struct Hunk {
    std::size_t a0, a1, b0, b1;  // token index ranges [a0,a1), [b0,b1)
  };
  std::vector<Hunk> hunks;
  std::size_t i = 0, j = 0, last_match_gap = 0;
  bool open = false;
  while (i < n || j < m) {
    if (i < n && j < m && tok(a.user, ta[i]) == tok(b.user, tb[j])) {
      ++i, ++j;
      ++last_match_gap;
      continue;
    }
    if (!open || last_match_gap > 2 * kDiffContext) {
      hunks.push_back({i, i, j, j});
      open = true;
    }
    if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j])) {
      ++j;
    } else {
      ++i;
    }
    hunks.back().a1 = i;
    hunks.back().b1 = j;
    last_match_gap = 0;
  }

  auto span_of = [](const std::vector<Token>& t, std::size_t from, std::size_t to, std::size_t text_size) {
    if (from == to) {
      auto pos = from < t.size() ? t[from].begin : text_size;
      return TextSpan{pos, pos};
    }
    return TextSpan{t[from].begin, t[to - 1].end};
  };

  std::vector<DiffSpan> out;
  if (hunks.empty() && a.user != b.user) {
    // Same tokens, different whitespace.
    out.push_back({{0, a.user.size()}, {0, b.user.size()}, a.user, b.user});
    return out;
  }
  for (const auto& h : hunks) {
    DiffSpan d;
    d.a = span_of(ta, h.a0, h.a1, a.user.size());
    d.b = span_of(tb, h.b0, h.b1, b.user.size());
    d.a_text = a.user.substr(d.a.begin, d.a.end - d.a.begin);
    d.b_text = b.user.substr(d.b.begin, d.b.end - d.b.begin);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace probe

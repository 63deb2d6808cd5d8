#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probe/condition.hpp"
#include "probe/corpus.hpp"

namespace probe {

/// Phases of the multi-agent qualitative protocol, each with its own prompt.
enum class AgentPhase {
  Reflexivity,
  InductiveRewrite,
  InductiveReasoning,
  InductiveSynthesis,
  DeductiveReview,
  DeductiveCode,
  DeductiveWithinSynthesis,
  DeductiveCrossSynthesis,
};

std::string_view to_string(AgentPhase phase);

/// A prompt body with `{placeholder}` slots and an optional system prompt.
struct PromptTemplate {
  std::string key;  // condition or phase name, e.g. "Rewrite-Autistic", "Reflexivity"
  std::optional<std::string> system_text;
  std::string user_text;
};

/// The full set of templates. Built-ins reproduce the published prompt texts;
/// a directory of front-matter files can override any of them.
///
/// File format:
///   ---
///   template: Rewrite-Autistic
///   system: InductiveSystem      (optional; names another template)
///   ---
///   <body>
class TemplateSet {
 public:
  static const TemplateSet& builtin();

  /// Loads every *.txt file in `dir` on top of `base`.
  static TemplateSet load_directory(const std::filesystem::path& dir, const TemplateSet& base = builtin());

  const PromptTemplate& get(std::string_view key) const;
  const PromptTemplate& get(Condition c) const { return get(to_string(c)); }
  const PromptTemplate& get(AgentPhase p) const { return get(to_string(p)); }
  bool contains(std::string_view key) const;

  /// Text of a template that is only used as a fragment (system prompts,
  /// persona clauses).
  const std::string& fragment(std::string_view key) const { return get(key).user_text; }

  void write_directory(const std::filesystem::path& dir) const;
  std::vector<std::string> keys() const;

  void put(PromptTemplate t, std::optional<std::string> system_ref = std::nullopt);

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
  std::map<std::string, std::string, std::less<>> system_refs_;
};

/// Byte range [begin, end) in a rendered text.
struct TextSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const TextSpan&) const = default;
};

struct RenderedPrompt {
  std::optional<std::string> system;
  std::string user;
  std::string template_key;
  std::optional<Condition> condition;
  std::optional<Persona> persona;
  std::string record_id;
  /// Ranges of `user` that were copied from the corpus record.
  std::vector<TextSpan> record_spans;

  bool operator==(const RenderedPrompt&) const = default;
};

/// One labelled in-context example.
struct IclExample {
  std::string text;
  int label = 0;
};

struct RenderOptions {
  /// Substituted for the file-name token in save instructions.
  std::string model_id = "model";
  /// When false, the ".xlsx" save sentence is removed from the prompt.
  bool keep_save_instruction = true;
};

inline constexpr std::string_view kAbsentContext = "N/A";

/// Value bound to a placeholder; `from_record` marks corpus-derived text.
struct Binding {
  std::string value;
  bool from_record = false;
};

/// Substitutes `{name}` placeholders in one pass. Substituted values are never
/// rescanned. Throws RenderError naming the first unbound placeholder.
std::string substitute(std::string_view text, const std::map<std::string, Binding, std::less<>>& bindings,
                       std::vector<TextSpan>* record_spans = nullptr);

/// Placeholder names appearing in `text`, in order of first appearance.
std::vector<std::string> placeholders(std::string_view text);

RenderedPrompt render(const SentenceRecord& record, Condition condition, std::optional<Persona> persona,
                      std::span<const IclExample> examples = {}, const RenderOptions& options = {},
                      const TemplateSet& templates = TemplateSet::builtin());

inline RenderedPrompt render_rewrite(const SentenceRecord& record, Persona persona, const RenderOptions& options = {},
                                     const TemplateSet& templates = TemplateSet::builtin()) {
  return render(record, rewrite_condition(persona), persona, {}, options, templates);
}

/// Renders an agent-phase prompt (system + user) from named bindings.
RenderedPrompt render_agent(AgentPhase phase, const std::map<std::string, Binding, std::less<>>& bindings,
                            const TemplateSet& templates = TemplateSet::builtin());

/// A region where two rendered prompts differ, as byte ranges in each.
struct DiffSpan {
  TextSpan a;
  TextSpan b;
  std::string a_text;
  std::string b_text;
};

/// Whitespace-token diff of two rewrite prompts for the same record. Hunks
/// separated by at most 2*kDiffContext unchanged tokens are merged, as in a
/// unified diff with kDiffContext lines of context. Empty iff identical.
inline constexpr std::size_t kDiffContext = 3;
std::vector<DiffSpan> persona_diff(const RenderedPrompt& a, const RenderedPrompt& b);

}  // namespace probe

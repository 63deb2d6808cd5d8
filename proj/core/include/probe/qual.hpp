#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "probe/gateway.hpp"
#include "probe/prompt.hpp"

namespace probe::qual {

enum class Role { InductiveCoder, DeductiveCoder, Synthesizer };

struct AgentSpec {
  std::string agent_id;
  ModelConfig model;
  Role role = Role::InductiveCoder;
};

/// FrameworkReview and DocumentCoding hold the B2.1 confirmation and each
/// per-document B2.2 reply so that every model call leaves a document.
enum class DocKind {
  Reflexivity,
  RewriteAnalysis,
  ReasoningAnalysis,
  InductiveSynthesis,
  FrameworkReview,
  DocumentCoding,
  DeductiveSynthesis,
  CrossSynthesis,
};

std::string_view to_string(DocKind k);
std::string_view to_string(Role r);

struct CodebookEntry {
  std::string category;
  std::string abbrev;
  std::string definition;
  std::string example;
  bool operator==(const CodebookEntry&) const = default;
};

enum class Theme { Focus, Identity, Impact, Intent, Stereotypes, Tone, Wording, Emergent };
enum class ThemeStatus { Present, NotPresent };
enum class Confidence { High, Medium, Low };

std::string_view to_string(Theme t);
std::string_view to_string(ThemeStatus s);
std::string_view to_string(Confidence c);

/// The seven framework themes, without Emergent.
const std::vector<Theme>& framework_themes();

struct ThemeCode {
  std::string agent_id;
  std::string document_id;
  Theme theme = Theme::Focus;
  ThemeStatus status = ThemeStatus::NotPresent;
  std::optional<std::string> quote;
  std::optional<std::string> code_label;
  std::optional<Confidence> confidence;
  bool operator==(const ThemeCode&) const = default;
};

/// Throws ValidationError unless Present rows carry quote, label and
/// confidence and NotPresent rows carry none of them.
void validate(const ThemeCode& code);

struct AnalysisDocument {
  std::string agent_id;
  DocKind kind = DocKind::Reflexivity;
  std::string subject;  // coded document id for DocumentCoding, else empty
  std::string raw_text;
  std::optional<std::vector<CodebookEntry>> codebook;
  std::optional<std::vector<ThemeCode>> codes;
  std::vector<std::string> warnings;

  /// <agent-id>_<kind>[_<subject>], filesystem-safe.
  std::string file_stem() const;
  nlohmann::json sidecar() const;
};

struct ParsedCodebook {
  std::optional<std::vector<CodebookEntry>> entries;
  std::vector<std::string> warnings;
};

/// Reads the last ```codebook fenced block of pipe-separated rows
/// (category | abbreviation | definition | example). Repeated abbreviations
/// are kept with a "-2", "-3", ... suffix and a warning.
ParsedCodebook parse_codebook(std::string_view text);

struct ParsedCodes {
  std::optional<std::vector<ThemeCode>> codes;
  std::vector<std::string> warnings;
};

/// Reads the last ```codes fenced block (theme | status | quote | label |
/// confidence). Rows violating the Present/NotPresent invariant are dropped
/// with a warning.
ParsedCodes parse_theme_codes(std::string_view text, const std::string& agent_id, const std::string& document_id);

/// Appended to analysis prompts to request the machine-readable blocks.
extern const std::string_view kCodebookFooter;
extern const std::string_view kCodesFooter;

struct QualOptions {
  bool structured_footer = true;
  GatewayOptions gateway;
};

/// Model gateways for a set of agents, one per distinct model id so that
/// agents sharing a model also share its cache file.
class GatewayPool {
 public:
  explicit GatewayPool(GatewayOptions options) : options_(std::move(options)) {}
  ChatGateway& get(const ModelConfig& config);
  void flush();

 private:
  GatewayOptions options_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<ChatGateway>> gateways_;
};

/// Thread-safe append-only store; documents() orders by protocol position.
class DocumentStore {
 public:
  void add(AnalysisDocument doc);
  std::vector<AnalysisDocument> documents() const;
  std::optional<AnalysisDocument> find(const std::string& agent_id, DocKind kind) const;
  std::size_t count(const std::string& agent_id, DocKind kind) const;

 private:
  mutable std::mutex mu_;
  std::vector<AnalysisDocument> docs_;
};

/// Reflexivity -> rewrite/reasoning analysis per coder, then synthesis. Each
/// coder holds one conversation, so later turns see earlier documents.
class InductiveProtocol {
 public:
  InductiveProtocol(std::vector<AgentSpec> coders, AgentSpec synthesizer, GatewayPool& gateways,
                    QualOptions options = {}, const TemplateSet& templates = TemplateSet::builtin());

  AnalysisDocument run_reflexivity(const std::string& agent_id);
  /// kind is RewriteAnalysis or ReasoningAnalysis; `data` is appended to the prompt.
  AnalysisDocument run_inductive(const std::string& agent_id, DocKind kind, const std::string& data);
  AnalysisDocument synthesize();

  /// All coders in parallel, then the synthesis barrier.
  void run(const std::string& rewrite_data, const std::string& reasoning_data);

  /// The B1.4 user prompt for the current documents (exposed for auditing).
  RenderedPrompt synthesis_prompt() const;

  const DocumentStore& store() const { return store_; }

 private:
  struct Coder {
    AgentSpec spec;
    std::vector<ChatMessage> history;
    std::mutex mu;
  };
  Coder& coder(const std::string& agent_id);
  std::string ask(Coder& c, AgentPhase phase, std::map<std::string, Binding, std::less<>> bindings, bool footer);

  std::vector<std::unique_ptr<Coder>> coders_;
  AgentSpec synthesizer_;
  GatewayPool& gateways_;
  QualOptions options_;
  const TemplateSet& templates_;
  DocumentStore store_;
};

/// One excerpt handed to deductive coders.
struct SourceDocument {
  std::string id;
  std::string text;
};

/// B2.1 review -> B2.2 per-document coding -> B2.3 within-model synthesis per
/// coder, then B2.4 across coders.
class DeductiveProtocol {
 public:
  DeductiveProtocol(std::vector<AgentSpec> coders, AgentSpec synthesizer, GatewayPool& gateways,
                    QualOptions options = {}, const TemplateSet& templates = TemplateSet::builtin());

  AnalysisDocument review(const std::string& agent_id);
  AnalysisDocument code_document(const std::string& agent_id, const SourceDocument& doc);
  AnalysisDocument within_synthesis(const std::string& agent_id);
  AnalysisDocument cross_synthesis();

  void run(const std::vector<SourceDocument>& docs);

  const DocumentStore& store() const { return store_; }
  /// Every accepted ThemeCode, in coder then document order.
  std::vector<ThemeCode> theme_codes() const;

 private:
  struct Coder {
    AgentSpec spec;
    std::vector<ChatMessage> framework;  // system + B2.1 exchange
    std::vector<std::string> coded;      // document ids, in coding order
    bool synthesized = false;
    std::mutex mu;
  };
  Coder& coder(const std::string& agent_id);

  std::vector<std::unique_ptr<Coder>> coders_;
  AgentSpec synthesizer_;
  GatewayPool& gateways_;
  QualOptions options_;
  const TemplateSet& templates_;
  DocumentStore store_;
};

/// Writes <stem>.md and <stem>.json for every document.
void write_documents(const std::filesystem::path& dir, const std::vector<AnalysisDocument>& docs);

std::string format_theme_codes_csv(const std::vector<ThemeCode>& codes);

}  // namespace probe::qual

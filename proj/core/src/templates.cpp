#include <algorithm>
#include <fstream>

#include "probe/error.hpp"
#include "probe/io.hpp"
#include "probe/prompt.hpp"
#include "probe/tokenize.hpp"

namespace probe {

namespace {

// Annotation prompts. Placeholders are filled per record at render time.

constexpr const char* kZeroShot = R"(Your task is to detect anti-autistic ableism in the target sentence. Use the preceding and following sentences that are optionally provided for more context.

Instructions:
1. View autism as a valid difference in neurotype.
2. Avoid viewing autism as a tragedy, disease, or deficit to be cured.
3. Be aware of biases from within the disabled community (e.g., "Aspie supremacy", which assumes people with Asperger's or "low-functioning autism" are intellectually superior to other autistic people).

Assign a label of 0 to target sentences that are not anti-autistic and 1 to those that are. Briefly explain your reasoning.

Save the sentences and your corresponding reasoning and labels in a file titled no_eg.xlsx.

Sentences:
Preceding sentence: {preceding_sentence}
Target sentence: {target_sentence}
Following sentence: {following_sentence})";

constexpr const char* kCoT = R"(Your task is to detect anti-autistic ableism in the target sentence. Use the preceding and following sentences that are optionally provided for more context.

Instructions:
1. Determine the speaker's identity (Insider vs. Outsider) and tone. Look for sarcasm or "reclaimed" terms (e.g., "Aspie") that might otherwise be mislabeled.
2. Check for keywords (e.g., "retard") and analyze whether they are used to attack or merely discussed in a meta-context.
3. Assess whether the sentence causes direct or indirect harm, violence, or dehumanization to the target group, regardless of the speaker's intent.

Assign a label of 0 to target sentences that are not anti-autistic and 1 to those that are. Briefly explain your reasoning.

Save the sentences and your corresponding reasoning and labels in a file titled {model}-cot.xlsx.

Sentences:
Preceding sentence: {preceding_sentence}
Target sentence: {target_sentence}
Following sentence: {following_sentence})";

constexpr const char* kIclA = R"(Your task is to detect anti-autistic ableism in the target sentence. Use the preceding and following sentences that are optionally provided for more context.

Here are some examples of sentences and their desired labels:

{examples}

Assign a label of 0 to sentences that are not anti-autistic and 1 to those that are. Briefly explain your reasoning. Save the sentences and your corresponding reasoning and labels in a file titled {model}-A.xlsx.

Sentences:
Preceding sentence: {preceding_sentence}
Target sentence: {target_sentence}
Following sentence: {following_sentence})";

constexpr const char* kIclB = R"(Your task is to detect anti-autistic ableism in the target sentence. Use the preceding and following sentences that are optionally provided for more context.

Here are some examples of sentences and their desired labels:

{examples}

Assign a label of 0 to sentences that are not anti-autistic and 1 to those that are. Briefly explain your reasoning. Save the sentences and your corresponding reasoning and labels in a file titled {model}-B.xlsx.

Sentences:
Preceding sentence: {preceding_sentence}
Target sentence: {target_sentence}
Following sentence: {following_sentence})";

constexpr const char* kPersonaIfl = R"(You are an autistic person asked to identify any ableism in the target sentences provided. Refer to the preceding and following sentences for context if needed.

Assign a label of 0 to sentences that are not ableist toward autistic people and 1 to those that are. Briefly explain your reasoning.

Save the sentences and your corresponding reasoning and labels in a file titled {model}-SIFL.xlsx.

Sentences:
Preceding sentence: {preceding_sentence}
Target sentence: {target_sentence}
Following sentence: {following_sentence})";

constexpr const char* kPersonaPfl = R"(You are a person with autism asked to identify any ableism in the target sentences provided. Refer to the preceding and following sentences for context if needed.

Assign a label of 0 to sentences that are not ableist toward people with autism and 1 to those that are. Briefly explain your reasoning.

Save the sentences and your corresponding reasoning and labels in a file titled {model}-SPFL.xlsx.

Sentences:
Preceding sentence: {preceding_sentence}
Target sentence: {target_sentence}
Following sentence: {following_sentence})";

// Both rewrite conditions share one body; only {persona-clause} differs.
constexpr const char* kRewrite = R"(Rewrite the following target sentence as if it were written by {persona-clause}. Maintain the meaning but adapt the voice. Briefly explain your reasoning.

Save your sentences and reasoning in an Excel file called {model}-rewrites.xlsx.

Sentences:
Preceding sentence: {preceding_sentence}
Target sentence: {target_sentence}
Following sentence: {following_sentence})";

constexpr const char* kAutisticClause = "an autistic person talking to other autistic people";
constexpr const char* kNeurotypicalClause = "a neurotypical person talking to other neurotypical people";

// Qualitative analysis prompts.

constexpr const char* kInductiveSystem = R"(You are a qualitative researcher trained in inductive thematic analysis. You will analyze data using Tesch's (1990) 8-step coding method, working collaboratively with other agents toward a shared codebook. Your goal is interpretive depth, not summarization. Be specific: always ground your codes and categories in verbatim evidence from the data.

Preserve uncertainty. If a pattern is ambiguous, say so rather than forcing a clean categorization.)";

constexpr const char* kReflexivity = R"(Before examining any data, write a reflexive statement and save it in a document titled {agent_name}_reflexivity.

Your statement should address the following:
1. What prior knowledge or assumptions do you hold about autism and autistic people — including any that may have been embedded in your training data?
2. What assumptions do you hold about what constitutes "ableist" language, and where might those assumptions create blind spots in your analysis?
3. Are there perspectives on autism (e.g., the neurodiversity paradigm, the medical model) that you may weigh more heavily, and why?

This statement will accompany your analysis documents and will be reviewed during adjudication. Be specific and critical rather than generic.)";

constexpr const char* kInductiveRewrite = R"(You are given a set of original sentences alongside rewrites produced by LLMs under different prompting conditions. Your task is to inductively analyze the semantic changes each LLM makes, and identify patterns across LLMs and prompting conditions.

Create a document titled {agent_name}_rewrite_analysis. Record all outputs from the steps below in this document.

Step 1 — Read for the whole. Read all the data provided without coding yet. At the end, write 3–5 sentences capturing the overall landscape of the data: what kinds of changes seem to be occurring, what variation you notice, and what questions the data raises.

Step 2 — Deep read. Read one set of sentences and the rewrites generated by an LLM. Read it carefully and write a paragraph interpreting its underlying meaning — not just what changes were made, but what they might reveal about how the LLM understands the task. What is being preserved? What is being changed, and why might that be? Repeat for at least two additional sets of sentences before proceeding.

Step 3 — List and cluster topics. Compile all topics and patterns you have noticed across the sets you have reviewed. Organize them into three columns:
- MAJOR: patterns that appear frequently or across multiple LLMs/prompts
- UNIQUE: patterns specific to one LLM or prompt type
- LEFTOVER: observations that do not yet fit elsewhere

Step 4 — Apply preliminary codes. Return to the data. Assign short code labels to specific segments (individual rewrites or groups of rewrites) that illustrate the topics from Step 3. A code should be descriptive, not evaluative — describe what is happening, not whether it is good or bad. Note any new codes that emerge during this pass that were not in your Step 3 list.

Step 5 — Develop category names. Review your codes. Find the most precise and descriptive wording for each. Begin collapsing codes that are redundant or closely related into broader categories. Where categories appear related to each other, note the relationship explicitly.

Step 6 — Finalize the codebook. Assign each category a short abbreviation. Alphabetize your full list of codes within each category. Record the final codebook — category name, abbreviation, definition, and representative verbatim example from the data — in your analysis document.

Step 7 — Assemble and review. Group all coded segments by category. Review each assembled group. Does the category still hold together, or does it need to be split? Are any segments miscoded?

Step 8 — Recode if necessary. Based on your review in Step 7, make any corrections. Record what you changed and why.

End your analysis document with a summary of findings (1–2 paragraphs) and your final list of codes.

{data})";

constexpr const char* kInductiveReasoning = R"(You will now analyze a different dataset containing sentences classified by LLMs as ableist or not ableist toward autistic people, along with the LLM's reasoning for each classification.

Important: The unit of analysis here is the reasoning itself — the justifications the LLMs provide — not the sentences being classified. You are studying how LLMs think about ableism, not whether their classifications are correct.

Create a document titled {agent_name}_reasoning_analysis. Begin by copying your reflexivity statement into this document, then note whether and how your assumptions may be especially relevant to this particular task.

Apply the following 8-step inductive coding method to your analysis.

Step 1 — Read for the whole. Read all data without coding yet. At the end, write 3–5 sentences capturing the overall landscape of the data: what kinds of reasoning patterns seem to be occurring, what variation you notice across LLMs and prompting conditions, and what questions the data raises. Pay particular attention to what kinds of evidence the LLMs appeal to when justifying their classifications, and what they seem to ignore or treat as irrelevant.

Step 2 — Deep read. Read one set of data from an LLM carefully and write a paragraph interpreting its underlying meaning — not just what classifications were made, but what the reasoning reveals about how the LLM understands ableism. Focus on the internal logic: is it consistent within the spreadsheet? Does the LLM acknowledge uncertainty? Does it reproduce any of the assumptions you identified in your reflexivity statement? Repeat for at least two additional LLMs before proceeding.

Step 3 — List and cluster topics. Compile all topics and patterns you have noticed. Organize them into four columns:
- MAJOR: patterns that appear frequently or across multiple LLMs or prompting conditions
- UNIQUE: patterns specific to one LLM or prompt type
- LEFTOVER: observations that do not yet fit elsewhere
- CONTRADICTIONS: logical inconsistencies within a single LLM's reasoning, or contradictions between how the same LLM reasons about similar cases

Steps 4–8 follow the same procedure as Prompt B1.2, applied to reasoning excerpts rather than rewrites. End your analysis document with a summary of findings (1–2 paragraphs) and your finalized list of codes.

{data})";

constexpr const char* kInductiveSynthesis = R"(You will now receive the rewrite analysis and reasoning analysis documents produced by all agents. Your task is to synthesize them into a shared codebook.

Work through the following:

1. Convergence. Identify codes and categories that appeared across multiple agents. Where agents used different labels for the same phenomenon, propose a consensus term and definition.

2. Divergence. Identify codes that agents disagreed on or that appeared in only one agent's analysis. For each, evaluate: is this a genuine analytic difference, a difference in labeling, or a result of one agent examining different parts of the corpus?

3. Reflexivity audit. Review the reflexivity statements from all agents. Flag any cases where an agent's stated assumptions appear to have influenced their coding in a specific, traceable way.

4. Final codebook. Produce a merged codebook with consensus category names, definitions, abbreviations, and at least one representative verbatim example per category drawn from the data.

5. Open questions. List any patterns that emerged in multiple analyses but remain ambiguous or undertheorized. These are candidates for discussion in your write-up's limitations section.

Below are the rewrite analysis and reasoning analysis documents produced by all agents, plus their reflexivity statements.

{agent_blocks}

Produce ONE shared synthesis following the 5 steps: Convergence, Divergence, Reflexivity Audit, Final Codebook, Open Questions. No single agent is the final authority — this is collaborative.)";

constexpr const char* kDeductiveSystem = R"(You are a qualitative researcher trained in thematic analysis (Braun & Clarke, 2006). You will analyze documents using a deductive approach: applying a predefined theoretical framework of themes to the data. Your job is to identify evidence within the text that maps onto existing themes, generate granular codes that explain how the evidence relates to the theme, and flag any patterns the existing themes do not capture.

Do not summarize documents. Do not evaluate whether content is harmful or not. Focus exclusively on the analytical task described.)";

constexpr const char* kDeductiveReview = R"(Before analyzing any documents, review the following thematic framework carefully.

Task context. These themes were developed through inductive analysis of a subset of LLM-generated reasoning about anti-autistic ableist speech. You will apply them deductively to the full corpus.

Themes and definitions:
- Focus — Whether the reasoning addresses relevance to autism specifically, vs. general harm or neutrality.
- Identity — Whether the reasoning references or infers the neurotype of the original poster and their intended audience.
- Impact — Whether the reasoning considers real-world effects on autistic or neurodivergent people.
- Intent — Whether the reasoning attributes or infers intentionality behind the original post.
- Stereotypes — Whether the reasoning invokes, challenges, or reproduces stereotypes about autistic/neurodivergent people.
- Tone — Whether the reasoning uses the overall tone of the post as evidence for its assessment.
- Wording — Whether the reasoning flags specific keywords or phrases as evidence.

Coding instructions:
- A theme is present if the reasoning contains identifiable evidence of it, even implicitly.
- For each present theme, extract a verbatim quote from the document and write a 1-sentence code label describing how the evidence relates to the theme.
- A single passage may be coded to multiple themes.
- Note any patterns not captured by the existing seven themes. Label these as Emergent.

Confirm you have reviewed the framework before proceeding.)";

constexpr const char* kDeductiveCode = R"(Analyze the following LLM reasoning excerpt using the thematic framework you reviewed. For each theme that is present, provide:
(a) a verbatim quote from the text as evidence
(b) a code label (a short descriptive phrase, not a category name)
(c) a confidence rating: High / Medium / Low

If a theme is absent, mark it as Not Present — do not force a fit. If you identify emergent patterns, label them clearly.

Format your output as a structured table.

[DOCUMENT ID: {document_id}]    [TEXT: {document_text}])";

constexpr const char* kDeductiveWithinSynthesis = R"(You have now coded {n_documents} documents. Review all of your coded outputs and do the following:

1. For each of the seven themes, describe how it manifested across documents — note any variation in how the theme appeared (i.e., sub-patterns or recurring code types).
2. Review all Emergent codes you generated. Cluster any that share a common pattern and propose candidate theme names and definitions for them.
3. Identify any of the original seven themes that appeared rarely or whose definition seemed ambiguous during coding. Propose revisions if warranted.

Output this as a structured synthesis document titled {agent_name}_deductive_synthesis.

{data})";

constexpr const char* kDeductiveCrossSynthesis = R"(You will now review deductive synthesis documents produced by all LLMs analyzing the same corpus. Your task is not to pick a winner, but to identify:

1. Convergence — Themes and codes that appeared consistently across all models.
2. Divergence — Themes or codes where models disagreed; describe the nature of each disagreement.
3. Unique contributions — Emergent themes proposed by only one model; evaluate whether they are analytically distinct or redundant.
4. Refined codebook — A final version of the thematic framework incorporating all well-supported revisions.

{attachments})";

struct Builtin {
  const char* key;
  const char* body;
  const char* system_ref;
};

constexpr Builtin kBuiltins[] = {
    {"ZeroShot", kZeroShot, nullptr},
    {"CoT", kCoT, nullptr},
    {"ICL-A", kIclA, nullptr},
    {"ICL-B", kIclB, nullptr},
    {"Persona-IFL", kPersonaIfl, nullptr},
    {"Persona-PFL", kPersonaPfl, nullptr},
    {"Rewrite-Autistic", kRewrite, nullptr},
    {"Rewrite-NT", kRewrite, nullptr},
    {"PersonaClause-Autistic", kAutisticClause, nullptr},
    {"PersonaClause-Neurotypical", kNeurotypicalClause, nullptr},
    {"InductiveSystem", kInductiveSystem, nullptr},
    {"DeductiveSystem", kDeductiveSystem, nullptr},
    {"Reflexivity", kReflexivity, "InductiveSystem"},
    {"InductiveRewrite", kInductiveRewrite, "InductiveSystem"},
    {"InductiveReasoning", kInductiveReasoning, "InductiveSystem"},
    {"InductiveSynthesis", kInductiveSynthesis, "InductiveSystem"},
    {"DeductiveReview", kDeductiveReview, "DeductiveSystem"},
    {"DeductiveCode", kDeductiveCode, "DeductiveSystem"},
    {"DeductiveWithinSynthesis", kDeductiveWithinSynthesis, "DeductiveSystem"},
    {"DeductiveCrossSynthesis", kDeductiveCrossSynthesis, "DeductiveSystem"},
};

TemplateSet make_builtin() {
  TemplateSet set;
  for (const auto& b : kBuiltins) {
    set.put({b.key, std::nullopt, b.body},
            b.system_ref ? std::optional<std::string>(b.system_ref) : std::nullopt);
  }
  return set;
}

// Parses "---\nkey: value\n...\n---\nbody". Returns (front-matter, body).
std::pair<std::map<std::string, std::string>, std::string> split_front_matter(const std::string& text,
                                                                               const std::string& origin) {
  std::map<std::string, std::string> meta;
  if (!text.starts_with("---\n")) throw SchemaError(origin + ": template file must start with '---' front matter");
  std::size_t pos = 4;
  while (true) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) throw SchemaError(origin + ": unterminated front matter");
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (trim(line) == "---") break;
    auto colon = line.find(':');
    if (colon == std::string::npos) throw SchemaError(origin + ": malformed front-matter line '" + line + "'");
    meta[trim(line.substr(0, colon))] = trim(line.substr(colon + 1));
  }
  auto body = text.substr(pos);
  // A single trailing newline is a file convention, not template content.
  if (body.ends_with('\n')) body.pop_back();
  return {meta, body};
}

}  // namespace

std::string_view to_string(AgentPhase phase) {
  switch (phase) {
    case AgentPhase::Reflexivity: return "Reflexivity";
    case AgentPhase::InductiveRewrite: return "InductiveRewrite";
    case AgentPhase::InductiveReasoning: return "InductiveReasoning";
    case AgentPhase::InductiveSynthesis: return "InductiveSynthesis";
    case AgentPhase::DeductiveReview: return "DeductiveReview";
    case AgentPhase::DeductiveCode: return "DeductiveCode";
    case AgentPhase::DeductiveWithinSynthesis: return "DeductiveWithinSynthesis";
    case AgentPhase::DeductiveCrossSynthesis: return "DeductiveCrossSynthesis";
  }
  return "?";
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = make_builtin();
  return set;
}

void TemplateSet::put(PromptTemplate t, std::optional<std::string> system_ref) {
  if (system_ref) {
    system_refs_[t.key] = *system_ref;
  }
  auto key = t.key;
  templates_[key] = std::move(t);
  // Resolve system text lazily from references so that overriding a system
  // prompt file propagates to every template that names it.
  for (auto& [k, tmpl] : templates_) {
    auto ref = system_refs_.find(k);
    if (ref == system_refs_.end()) continue;
    auto sys = templates_.find(ref->second);
    tmpl.system_text = sys == templates_.end() ? std::nullopt : std::optional<std::string>(sys->second.user_text);
  }
}

bool TemplateSet::contains(std::string_view key) const { return templates_.find(key) != templates_.end(); }

const PromptTemplate& TemplateSet::get(std::string_view key) const {
  auto it = templates_.find(key);
  if (it == templates_.end()) throw UsageError("no prompt template named '" + std::string(key) + "'");
  return it->second;
}

std::vector<std::string> TemplateSet::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : templates_) out.push_back(k);
  return out;
}

TemplateSet TemplateSet::load_directory(const std::filesystem::path& dir, const TemplateSet& base) {
  if (!std::filesystem::is_directory(dir)) throw UsageError("template directory not found: " + dir.string());
  TemplateSet set = base;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto [meta, body] = split_front_matter(read_text_file(f), f.string());
    auto key = meta.find("template");
    if (key == meta.end() || key->second.empty()) throw SchemaError(f.string() + ": front matter lacks 'template'");
    std::optional<std::string> sys;
    if (auto s = meta.find("system"); s != meta.end() && !s->second.empty()) sys = s->second;
    else if (auto old = set.system_refs_.find(key->second); old != set.system_refs_.end()) sys = old->second;
    set.put({key->second, std::nullopt, body}, sys);
  }
  return set;
}

void TemplateSet::write_directory(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [key, tmpl] : templates_) {
    std::string text = "---\ntemplate: " + key + "\n";
    if (auto ref = system_refs_.find(key); ref != system_refs_.end()) text += "system: " + ref->second + "\n";
    text += "---\n" + tmpl.user_text + "\n";
    write_file_atomic(dir / (key + ".txt"), text);
  }
}

}  // namespace probe

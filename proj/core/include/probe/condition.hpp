#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace probe {

/// Prompting conditions applied to annotator models.
enum class Condition {
  ZeroShot,
  CoT,
  IclA,
  IclB,
  PersonaIfl,
  PersonaPfl,
  RewriteAutistic,
  RewriteNt,
};

enum class Persona { Autistic, Neurotypical };

std::string_view to_string(Condition c);
std::string_view to_string(Persona p);

/// Accepts the canonical names ("ZeroShot", "ICL-A", "Rewrite-NT", ...),
/// case-insensitively.
std::optional<Condition> parse_condition(std::string_view name);
std::optional<Persona> parse_persona(std::string_view name);

constexpr bool is_rewrite(Condition c) {
  return c == Condition::RewriteAutistic || c == Condition::RewriteNt;
}
constexpr bool is_icl(Condition c) { return c == Condition::IclA || c == Condition::IclB; }

constexpr Condition rewrite_condition(Persona p) {
  return p == Persona::Autistic ? Condition::RewriteAutistic : Condition::RewriteNt;
}

}  // namespace probe

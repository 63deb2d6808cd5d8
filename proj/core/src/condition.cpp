#include "probe/condition.hpp"

#include <array>
#include <utility>

#include "probe/tokenize.hpp"

namespace probe {

namespace {

constexpr std::array<std::pair<Condition, std::string_view>, 8> kConditions{{
    {Condition::ZeroShot, "ZeroShot"},
    {Condition::CoT, "CoT"},
    {Condition::IclA, "ICL-A"},
    {Condition::IclB, "ICL-B"},
    {Condition::PersonaIfl, "Persona-IFL"},
    {Condition::PersonaPfl, "Persona-PFL"},
    {Condition::RewriteAutistic, "Rewrite-Autistic"},
    {Condition::RewriteNt, "Rewrite-NT"},
}};

}  // namespace

std::string_view to_string(Condition c) {
  for (const auto& [cond, name] : kConditions)
    if (cond == c) return name;
  return "?";
}

std::string_view to_string(Persona p) {
  return p == Persona::Autistic ? "Autistic" : "Neurotypical";
}

std::optional<Condition> parse_condition(std::string_view name) {
  const auto wanted = to_lower_ascii(name);
  for (const auto& [cond, canonical] : kConditions)
    if (to_lower_ascii(canonical) == wanted) return cond;
  return std::nullopt;
}

std::optional<Persona> parse_persona(std::string_view name) {
  const auto wanted = to_lower_ascii(name);
  if (wanted == "autistic" || wanted == "aut") return Persona::Autistic;
  if (wanted == "neurotypical" || wanted == "nt") return Persona::Neurotypical;
  return std::nullopt;
}

}  // namespace probe

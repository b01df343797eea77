#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "reflect/corpus.hpp"

namespace reflect {

/// The nine agent kinds: the non-reflecting baseline plus the eight
/// reflecting variants, ordered as reported.
enum class AgentKind {
  baseline,
  retry,
  keywords,
  advice,
  explanation,
  instructions,
  solution,
  composite,
  unredacted,
};

constexpr std::array<AgentKind, 9> kAllAgents = {
    AgentKind::baseline,     AgentKind::retry,    AgentKind::keywords,
    AgentKind::advice,       AgentKind::explanation, AgentKind::instructions,
    AgentKind::solution,     AgentKind::composite,   AgentKind::unredacted,
};

std::string to_string(AgentKind kind);
std::optional<AgentKind> agent_from_string(const std::string& name);
std::vector<AgentKind> reflecting_agents();  // all but baseline

/// The five generated sections of a self-reflection, split from the raw
/// completion. Every field is a contiguous region of `raw`; list items keep
/// their source order. Unrecognized or absent headers leave a section empty
/// and add a warning.
struct ReflectionSections {
  std::string explanation;
  std::vector<std::string> error_keywords;
  std::string solution;
  std::vector<std::string> instructions;
  std::vector<std::string> advice;
  std::string raw;
  std::vector<std::string> warnings;

  bool parse_warning() const { return !warnings.empty(); }
  bool all_empty() const {
    return explanation.empty() && error_keywords.empty() && solution.empty() &&
           instructions.empty() && advice.empty();
  }
};

struct RedactionSpec {
  std::vector<std::string> labels;
  std::vector<std::string> descriptions;
  std::string replacement = "[REDACTED]";

  static RedactionSpec for_problem(const Problem& problem);
};

ReflectionSections parse_reflection(const std::string& completion_text);

/// Greedy answer-leakage removal: every choice description (longest first,
/// case-insensitive substring) and every standalone choice label
/// (word-boundary, case-sensitive) becomes the replacement token, repeated
/// until a fixed point. Idempotent; existing replacement tokens are left
/// untouched.
std::string redact(const std::string& text, const RedactionSpec& spec);

/// Builds the text injected into the re-answer prompt for one agent kind:
/// retry is empty, the single-section agents carry that section redacted,
/// composite carries all five sections redacted, unredacted carries all five
/// verbatim. The baseline agent has no payload.
std::string build_payload(AgentKind kind, const ReflectionSections& sections,
                          const RedactionSpec& spec);

struct LeakFinding {
  enum class Kind { label, description };
  Kind kind;
  std::string token;
  std::size_t offset = 0;
};

/// Post-hoc leakage check, implemented independently of redact(): reports
/// any surviving description substring or standalone label token outside
/// replacement markers.
std::vector<LeakFinding> scan_for_leakage(const std::string& text, const RedactionSpec& spec);

}  // namespace reflect

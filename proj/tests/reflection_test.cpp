#include "reflect/reflection.hpp"

#include <algorithm>
#include <random>

#include "doctest.h"
#include "reflect/util.hpp"
#include "test_support.hpp"

using namespace reflect;

namespace {

RedactionSpec geography_spec() {
  RedactionSpec spec;
  spec.labels = {"A", "B", "C", "D"};
  spec.descriptions = {"Baltimore", "Annapolis", "Des Moines", "Las Vegas"};
  return spec;
}

}  // namespace

TEST_CASE("parse_reflection splits the canonical example into five sections") {
  ReflectionSections sections = parse_reflection(testsupport::kExampleReflectionOutput);
  CHECK_FALSE(sections.parse_warning());
  CHECK(sections.explanation.find("miscalculated") != std::string::npos);
  REQUIRE(sections.error_keywords.size() == 3);
  CHECK(sections.error_keywords[0] == "Calculation error");
  CHECK(sections.error_keywords[1] == "Arithmetic error");
  CHECK(sections.error_keywords[2] == "Multiplication error");
  CHECK(sections.solution.find("The product of 4*4 is 16.") != std::string::npos);
  CHECK(sections.instructions.size() == 8);
  CHECK(sections.instructions[0] == "Identify the city where the university is located.");
  CHECK(sections.advice.size() == 6);
  CHECK(sections.advice[4] == "Always double-check your calculations and final answer.");
}

TEST_CASE("parse_reflection on empty text yields empty sections and a warning") {
  ReflectionSections sections = parse_reflection("");
  CHECK(sections.all_empty());
  CHECK(sections.parse_warning());
  CHECK(sections.warnings.size() == 5);
}

TEST_CASE("parse_reflection ignores unknown preamble and tolerates markdown headers") {
  ReflectionSections sections = parse_reflection(
      "Sure, here is my reflection.\n## Explanation:\nI rushed.\n**Error Keywords:**\n- Haste "
      "error\n");
  CHECK(sections.explanation == "I rushed.");
  REQUIRE(sections.error_keywords.size() == 1);
  CHECK(sections.error_keywords[0] == "Haste error");
  CHECK(sections.parse_warning());  // three sections missing
}

TEST_CASE("parse_reflection captures sections by header name, not position") {
  // Permute the five section blocks of the canonical example and check the
  // parse is field-wise identical to the unpermuted parse.
  const ReflectionSections expected = parse_reflection(testsupport::kExampleReflectionOutput);

  // Split the example into header-led blocks.
  std::vector<std::string> blocks;
  std::string current;
  for (const auto& line : split_lines(std::string(testsupport::kExampleReflectionOutput))) {
    bool is_header = line == "Explanation:" || line == "Error Keywords:" ||
                     line == "Solution:" || line == "Instructions:" || line == "Advice:";
    if (is_header && !current.empty()) {
      blocks.push_back(current);
      current.clear();
    }
    current += line;
    current += '\n';
  }
  blocks.push_back(current);
  REQUIRE(blocks.size() == 5);

  std::mt19937 rng(20240615);
  for (int round = 0; round < 50; ++round) {
    std::shuffle(blocks.begin(), blocks.end(), rng);
    std::string permuted;
    for (const auto& block : blocks) permuted += block;
    ReflectionSections sections = parse_reflection(permuted);
    CHECK(sections.explanation == expected.explanation);
    CHECK(sections.error_keywords == expected.error_keywords);
    CHECK(sections.solution == expected.solution);
    CHECK(sections.instructions == expected.instructions);
    CHECK(sections.advice == expected.advice);
  }
}

TEST_CASE("parsed sections are contiguous regions of the raw completion") {
  ReflectionSections sections = parse_reflection(testsupport::kExampleReflectionOutput);
  const std::string& raw = sections.raw;
  CHECK(raw.find(sections.explanation) != std::string::npos);
  CHECK(raw.find(sections.solution) != std::string::npos);
  for (const auto& item : sections.error_keywords) CHECK(raw.find(item) != std::string::npos);
  for (const auto& item : sections.instructions) CHECK(raw.find(item) != std::string::npos);
  for (const auto& item : sections.advice) CHECK(raw.find(item) != std::string::npos);
}

TEST_CASE("redact replaces descriptions and standalone labels") {
  std::string input = "The capital of Maryland is Annapolis. Action: Answer(\"B\")";
  std::string output = redact(input, geography_spec());
  CHECK(output == "The capital of Maryland is [REDACTED]. Action: Answer(\"[REDACTED]\")");
}

TEST_CASE("redact leaves embedded label letters alone") {
  // "A" inside words like "Action" or "Answer" is not a standalone token.
  std::string output = redact("Action: Answer was D earlier.", geography_spec());
  CHECK(output == "Action: Answer was [REDACTED] earlier.");
}

TEST_CASE("redact is case-insensitive for descriptions, case-sensitive for labels") {
  std::string output = redact("las vegas and ANNAPOLIS; lowercase d stays.", geography_spec());
  CHECK(output == "[REDACTED] and [REDACTED]; lowercase d stays.");
}

TEST_CASE("redact handles empty input and reaches a fixed point") {
  RedactionSpec spec = geography_spec();
  CHECK(redact("", spec).empty());
  // A description that is a substring of the replacement token must not
  // cause runaway rewriting.
  RedactionSpec tricky;
  tricky.labels = {"A"};
  tricky.descriptions = {"red", "acted"};
  std::string once = redact("red acted A red", tricky);
  CHECK(once == "[REDACTED] [REDACTED] [REDACTED] [REDACTED]");
  CHECK(redact(once, tricky) == once);
}

TEST_CASE("redact prefers longer descriptions") {
  RedactionSpec spec;
  spec.labels = {"1", "2"};
  spec.descriptions = {"New York", "New York City"};
  CHECK(redact("I chose New York City.", spec) == "I chose [REDACTED].");
}

TEST_CASE("build_payload per agent kind") {
  ReflectionSections sections = parse_reflection(testsupport::kExampleReflectionOutput);
  RedactionSpec spec;
  spec.labels = {"A", "B", "C", "D"};
  spec.descriptions = {"16", "20", "24", "32"};

  CHECK(build_payload(AgentKind::retry, sections, spec).empty());
  CHECK_THROWS_AS(build_payload(AgentKind::baseline, sections, spec), std::invalid_argument);

  std::string keywords = build_payload(AgentKind::keywords, sections, spec);
  CHECK(keywords ==
        "Error Keywords:\n - Calculation error\n - Arithmetic error\n - Multiplication error");

  std::string advice = build_payload(AgentKind::advice, sections, spec);
  CHECK(advice.find("Advice:") == 0);
  CHECK(advice.find("Always read the question carefully") != std::string::npos);

  std::string instructions = build_payload(AgentKind::instructions, sections, spec);
  CHECK(instructions.find("Instructions:\n1. Identify the city") == 0);

  // The solution leaks "16": redacted for solution/composite, kept verbatim
  // for unredacted.
  std::string solution = build_payload(AgentKind::solution, sections, spec);
  CHECK(solution.find("16") == std::string::npos);
  CHECK(solution.find("[REDACTED]") != std::string::npos);

  std::string composite = build_payload(AgentKind::composite, sections, spec);
  for (const char* header :
       {"Explanation:", "Error Keywords:", "Solution:", "Instructions:", "Advice:"}) {
    CHECK(composite.find(header) != std::string::npos);
  }

  std::string unredacted = build_payload(AgentKind::unredacted, sections, spec);
  CHECK(unredacted.find("The product of 4*4 is 16.") != std::string::npos);
  // Unredacted equals composite before redaction.
  CHECK(redact(unredacted, spec) == composite);
}

TEST_CASE("payloads from empty sections are empty") {
  ReflectionSections sections = parse_reflection("no recognizable headers here");
  RedactionSpec spec = geography_spec();
  for (AgentKind agent : reflecting_agents()) {
    CHECK(build_payload(agent, sections, spec).empty());
  }
}

TEST_CASE("scanner flags leakage in unredacted payloads and passes redacted ones") {
  ReflectionSections sections = parse_reflection(testsupport::kExampleReflectionOutput);
  RedactionSpec spec;
  spec.labels = {"A", "B", "C", "D"};
  spec.descriptions = {"16", "20", "24", "32"};
  CHECK_FALSE(scan_for_leakage(build_payload(AgentKind::unredacted, sections, spec), spec).empty());
  for (AgentKind agent : reflecting_agents()) {
    if (agent == AgentKind::unredacted) continue;
    CHECK(scan_for_leakage(build_payload(agent, sections, spec), spec).empty());
  }
}

TEST_CASE("scanner ignores replacement markers but sees text around them") {
  RedactionSpec spec = geography_spec();
  CHECK(scan_for_leakage("all clear here", spec).empty());
  CHECK(scan_for_leakage("[REDACTED] is hidden", spec).empty());
  auto findings = scan_for_leakage("[REDACTED] but Baltimore leaked", spec);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].kind == LeakFinding::Kind::description);
  CHECK(findings[0].token == "Baltimore");
  findings = scan_for_leakage("answer \"D\" leaked", spec);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].kind == LeakFinding::Kind::label);
}

#include "reflect/convert.hpp"

#include "doctest.h"
#include "reflect/corpus.hpp"
#include "reflect/jsonl.hpp"
#include "reflect/util.hpp"
#include "test_support.hpp"

using namespace reflect;

namespace {

std::vector<Problem> converted_problems(const std::string& path) {
  std::vector<Problem> problems;
  std::size_t line_number = 0;
  for (const auto& line : split_lines(read_text_file(path))) {
    ++line_number;
    if (trim(line).empty()) continue;
    problems.push_back(parse_problem(line, line_number));
  }
  return problems;
}

}  // namespace

TEST_CASE("arc rows convert to the standardized schema") {
  testsupport::TempDir tmp;
  write_text_file(
      tmp.sub("arc.jsonl"),
      R"({"id": "Mercury_1", "question": {"stem": "Which gas do plants absorb?", "choices": [{"text": "Oxygen", "label": "A"}, {"text": "Carbon dioxide", "label": "B"}]}, "answerKey": "B"})"
      "\n"
      R"({"id": "Mercury_2", "question": {"stem": "No key here", "choices": [{"text": "x", "label": "A"}, {"text": "y", "label": "B"}]}})"
      "\n");
  ConversionReport report = convert_file(tmp.sub("arc.jsonl"), "arc", "arc/arc-challenge-test",
                                         "Science", tmp.sub("out.jsonl"));
  CHECK(report.converted == 1);
  CHECK(report.skipped == 1);
  REQUIRE(report.messages.size() == 1);
  CHECK(report.messages[0].find("missing gold answer") != std::string::npos);

  std::vector<Problem> problems = converted_problems(tmp.sub("out.jsonl"));
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].source == "arc/arc-challenge-test");
  CHECK(problems[0].source_id == 1);
  CHECK(problems[0].topic == "Science");
  CHECK(problems[0].answer == "B");
  CHECK(problems[0].extras.at("original_id") == "Mercury_1");
}

TEST_CASE("agieval rows keep the passage as context and strip option prefixes") {
  testsupport::TempDir tmp;
  write_text_file(
      tmp.sub("lsat.jsonl"),
      R"({"passage": "Some long passage.", "question": "Which must be true?", "options": ["(A)first claim", "(B)second claim", "(C)third claim"], "label": "C"})"
      "\n");
  convert_file(tmp.sub("lsat.jsonl"), "agieval", "agieval/lsat-ar", "Law", tmp.sub("out.jsonl"));
  std::vector<Problem> problems = converted_problems(tmp.sub("out.jsonl"));
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].context == "Some long passage.");
  CHECK(problems[0].choices[0].description == "first claim");
  CHECK(problems[0].choices[2].label == "C");
  CHECK(problems[0].answer == "C");
}

TEST_CASE("agieval accepts integer labels") {
  testsupport::TempDir tmp;
  write_text_file(tmp.sub("aqua.jsonl"),
                  R"({"question": "2+2?", "options": ["3", "4"], "label": 1})"
                  "\n");
  convert_file(tmp.sub("aqua.jsonl"), "agieval", "agieval/aqua-rat", "Math", tmp.sub("out.jsonl"));
  std::vector<Problem> problems = converted_problems(tmp.sub("out.jsonl"));
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].answer == "B");
}

TEST_CASE("hellaswag rows become numeric-label continuation problems") {
  testsupport::TempDir tmp;
  write_text_file(
      tmp.sub("hs.jsonl"),
      R"({"ctx": "A man sits at a piano.", "endings": ["He begins to play.", "He eats the piano.", "He swims away.", "He flies."], "label": "0"})"
      "\n");
  convert_file(tmp.sub("hs.jsonl"), "hellaswag", "hellaswag/val", "Common Sense Reasoning",
               tmp.sub("out.jsonl"));
  std::vector<Problem> problems = converted_problems(tmp.sub("out.jsonl"));
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].context == "A man sits at a piano.");
  CHECK(problems[0].choices[0].label == "1");
  CHECK(problems[0].answer == "1");
  CHECK(problems[0].choices.size() == 4);
}

TEST_CASE("medmcqa rows map the 0-based gold option index") {
  testsupport::TempDir tmp;
  write_text_file(
      tmp.sub("med.jsonl"),
      R"({"question": "Most common site?", "opa": "Liver", "opb": "Lung", "opc": "Bone", "opd": "Brain", "cop": 2})"
      "\n"
      R"({"question": "Out of range", "opa": "X", "opb": "Y", "cop": 7})"
      "\n");
  ConversionReport report = convert_file(tmp.sub("med.jsonl"), "medmcqa", "medmcqa/valid",
                                         "Medicine", tmp.sub("out.jsonl"));
  CHECK(report.converted == 1);
  CHECK(report.skipped == 1);
  std::vector<Problem> problems = converted_problems(tmp.sub("out.jsonl"));
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].answer == "C");
}

TEST_CASE("unknown formats and empty sources are reported") {
  testsupport::TempDir tmp;
  write_text_file(tmp.sub("in.jsonl"), "");
  CHECK_THROWS_AS(
      convert_file(tmp.sub("in.jsonl"), "bogus", "s", "t", tmp.sub("out.jsonl")),
      std::invalid_argument);
  ConversionReport report =
      convert_file(tmp.sub("in.jsonl"), "arc", "s", "t", tmp.sub("out.jsonl"));
  CHECK(report.converted == 0);
  CHECK(report.skipped == 0);
}

TEST_CASE("converted output always satisfies the problem invariants") {
  testsupport::TempDir tmp;
  // A row whose options collapse to one entry must be skipped, not emitted.
  write_text_file(tmp.sub("bad.jsonl"),
                  R"({"question": "Q?", "options": ["only"], "label": "A"})"
                  "\n");
  ConversionReport report =
      convert_file(tmp.sub("bad.jsonl"), "agieval", "s", "t", tmp.sub("out.jsonl"));
  CHECK(report.converted == 0);
  CHECK(report.skipped == 1);
}

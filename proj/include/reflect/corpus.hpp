#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace reflect {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Choice {
  std::string label;
  std::string description;
};

/// One multiple-choice problem in the standardized JSON-L schema:
/// source, source_id, topic, context, question, choices, answer, solution.
/// Choice order follows the source line; unknown fields are kept so a
/// parsed problem serializes back without loss.
struct Problem {
  std::string source;
  std::int64_t source_id = 0;
  std::string topic;
  std::string context;
  std::string question;
  std::vector<Choice> choices;
  std::string answer;
  std::string solution;
  nlohmann::ordered_json extras = nlohmann::ordered_json::object();

  const std::string* find_choice(const std::string& label) const;
  const std::string& gold_description() const;
  std::vector<std::string> labels() const;
  std::string identity() const;  // "source#source_id"
};

struct ProblemSet {
  std::string name;
  std::string domain;
  std::vector<Problem> problems;
  std::string license;
};

struct Exam {
  std::string name;
  std::vector<Problem> problems;
};

/// Identifies an exam for byte-exact reconstruction: the draw seed plus the
/// ordered (source, source_id) list.
struct ExamManifest {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::int64_t>> problems;
};

/// Parses one JSON-L line into a Problem and checks its invariants
/// (answer among choices, >= 2 uniquely labeled choices, non-empty
/// descriptions). line_number is used only for error messages.
Problem parse_problem(const std::string& line, std::size_t line_number = 0);

/// Canonical field order, one line, no trailing newline.
std::string serialize_problem(const Problem& problem);

bool structurally_equal(const Problem& a, const Problem& b);

/// Loads a whole problem-set file, rejecting duplicate (source, source_id).
ProblemSet load_problem_set(const std::string& path, const std::string& name = "",
                            const std::string& domain = "");

void write_problem_set(const ProblemSet& set, const std::string& path);

/// Draws n distinct problems from the set. The draw is a deterministic
/// function of (set order, n, seed); equal inputs give element-wise equal
/// exams.
Exam sample_exam(const ProblemSet& set, std::size_t n, std::uint64_t seed);

/// Concatenates per-set exams into one multi-domain exam. Parts must be
/// pairwise problem-disjoint; |result| equals the sum of part sizes.
Exam assemble_multi_domain(const std::vector<Exam>& exams, const std::string& name = "");

Exam load_exam(const std::string& path, const std::string& name = "");
void write_exam(const Exam& exam, const std::string& path);

ExamManifest manifest_for(const Exam& exam, std::uint64_t seed);
std::string serialize_exam_manifest(const ExamManifest& manifest);
ExamManifest parse_exam_manifest(const std::string& text);

/// Rebuilds the exact exam an ExamManifest describes from the given sets.
Exam reconstruct_exam(const ExamManifest& manifest, const std::vector<ProblemSet>& sets);

}  // namespace reflect

#include "reflect/corpus.hpp"

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "reflect/jsonl.hpp"
#include "reflect/util.hpp"

namespace reflect {

namespace {

using ordered_json = nlohmann::ordered_json;

const char* const kKnownFields[] = {"source",   "source_id", "topic",  "context",
                                    "question", "choices",   "answer", "solution"};

bool is_known_field(const std::string& key) {
  for (const char* f : kKnownFields) {
    if (key == f) return true;
  }
  return false;
}

[[noreturn]] void fail(std::size_t line_number, const std::string& message) {
  if (line_number > 0) {
    throw CorpusError("line " + std::to_string(line_number) + ": " + message);
  }
  throw CorpusError(message);
}

std::string require_string(const ordered_json& obj, const char* field, std::size_t line_number,
                           bool allow_empty) {
  if (!obj.contains(field)) fail(line_number, std::string("missing required field '") + field + "'");
  const auto& value = obj.at(field);
  if (!value.is_string()) fail(line_number, std::string("field '") + field + "' must be a string");
  std::string text = value.get<std::string>();
  if (!allow_empty && text.empty()) {
    fail(line_number, std::string("field '") + field + "' must be non-empty");
  }
  return text;
}

}  // namespace

const std::string* Problem::find_choice(const std::string& label) const {
  for (const auto& choice : choices) {
    if (choice.label == label) return &choice.description;
  }
  return nullptr;
}

const std::string& Problem::gold_description() const {
  const std::string* description = find_choice(answer);
  if (!description) throw CorpusError("answer label '" + answer + "' not in choices");
  return *description;
}

std::vector<std::string> Problem::labels() const {
  std::vector<std::string> out;
  out.reserve(choices.size());
  for (const auto& choice : choices) out.push_back(choice.label);
  return out;
}

std::string Problem::identity() const { return source + "#" + std::to_string(source_id); }

Problem parse_problem(const std::string& line, std::size_t line_number) {
  ordered_json obj = ordered_json::parse(line, nullptr, false);
  if (obj.is_discarded()) fail(line_number, "malformed JSON");
  if (!obj.is_object()) fail(line_number, "expected a JSON object");

  Problem problem;
  problem.source = require_string(obj, "source", line_number, false);

  if (!obj.contains("source_id")) fail(line_number, "missing required field 'source_id'");
  if (!obj.at("source_id").is_number_integer()) {
    fail(line_number, "field 'source_id' must be an integer");
  }
  problem.source_id = obj.at("source_id").get<std::int64_t>();
  if (problem.source_id < 0) fail(line_number, "field 'source_id' must be >= 0");

  problem.topic = require_string(obj, "topic", line_number, false);
  problem.context = require_string(obj, "context", line_number, true);
  problem.question = require_string(obj, "question", line_number, false);

  if (!obj.contains("choices") || !obj.at("choices").is_object()) {
    fail(line_number, "missing or non-object field 'choices'");
  }
  std::set<std::string> seen_labels;
  for (const auto& [label, description] : obj.at("choices").items()) {
    if (!description.is_string() || description.get<std::string>().empty()) {
      fail(line_number, "choice '" + label + "' must have a non-empty description");
    }
    if (!seen_labels.insert(label).second) {
      fail(line_number, "duplicate choice label '" + label + "'");
    }
    problem.choices.push_back({label, description.get<std::string>()});
  }
  if (problem.choices.size() < 2) fail(line_number, "choices must have at least 2 entries");

  problem.answer = require_string(obj, "answer", line_number, false);
  if (!problem.find_choice(problem.answer)) fail(line_number, "answer not in choices");

  problem.solution = require_string(obj, "solution", line_number, true);

  for (const auto& [key, value] : obj.items()) {
    if (!is_known_field(key)) problem.extras[key] = value;
  }
  return problem;
}

std::string serialize_problem(const Problem& problem) {
  ordered_json obj;
  obj["source"] = problem.source;
  obj["source_id"] = problem.source_id;
  obj["topic"] = problem.topic;
  obj["context"] = problem.context;
  obj["question"] = problem.question;
  ordered_json choices = ordered_json::object();
  for (const auto& choice : problem.choices) choices[choice.label] = choice.description;
  obj["choices"] = choices;
  obj["answer"] = problem.answer;
  obj["solution"] = problem.solution;
  for (const auto& [key, value] : problem.extras.items()) obj[key] = value;
  return obj.dump();
}

bool structurally_equal(const Problem& a, const Problem& b) {
  if (a.source != b.source || a.source_id != b.source_id || a.topic != b.topic ||
      a.context != b.context || a.question != b.question || a.answer != b.answer ||
      a.solution != b.solution || a.choices.size() != b.choices.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.choices.size(); ++i) {
    if (a.choices[i].label != b.choices[i].label ||
        a.choices[i].description != b.choices[i].description) {
      return false;
    }
  }
  return a.extras == b.extras;
}

ProblemSet load_problem_set(const std::string& path, const std::string& name,
                            const std::string& domain) {
  ProblemSet set;
  set.name = name.empty() ? path : name;
  set.domain = domain;
  std::string text = read_text_file(path);
  std::size_t line_number = 0;
  std::set<std::string> identities;
  for (const auto& line : split_lines(text)) {
    ++line_number;
    if (trim(line).empty()) continue;
    Problem problem;
    try {
      problem = parse_problem(line, line_number);
    } catch (const CorpusError& e) {
      throw CorpusError(path + ": " + e.what());
    }
    if (!identities.insert(problem.identity()).second) {
      throw CorpusError(path + ": line " + std::to_string(line_number) +
                        ": duplicate (source, source_id) " + problem.identity());
    }
    set.problems.push_back(std::move(problem));
  }
  if (set.problems.empty()) throw CorpusError(path + ": problem set is empty");
  return set;
}

void write_problem_set(const ProblemSet& set, const std::string& path) {
  std::string out;
  for (const auto& problem : set.problems) {
    out += serialize_problem(problem);
    out += '\n';
  }
  write_text_file(path, out);
}

Exam sample_exam(const ProblemSet& set, std::size_t n, std::uint64_t seed) {
  if (n > set.problems.size()) {
    throw CorpusError("cannot sample " + std::to_string(n) + " problems from set '" + set.name +
                      "' of size " + std::to_string(set.problems.size()));
  }
  // Partial Fisher-Yates over an index array. mt19937_64 output is fixed by
  // the standard, so the draw is reproducible across platforms; std::shuffle
  // and uniform_int_distribution are not, which is why neither is used here.
  std::vector<std::size_t> indices(set.problems.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  std::mt19937_64 rng(seed);
  Exam exam;
  exam.name = set.name;
  exam.problems.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t remaining = indices.size() - i;
    std::size_t pick = i + static_cast<std::size_t>(rng() % remaining);
    std::swap(indices[i], indices[pick]);
    exam.problems.push_back(set.problems[indices[i]]);
  }
  return exam;
}

Exam assemble_multi_domain(const std::vector<Exam>& exams, const std::string& name) {
  Exam result;
  result.name = name.empty() ? "multi-domain" : name;
  std::set<std::string> identities;
  for (const auto& part : exams) {
    for (const auto& problem : part.problems) {
      if (!identities.insert(problem.identity()).second) {
        throw CorpusError("duplicate (source, source_id) across exam parts: " +
                          problem.identity());
      }
      result.problems.push_back(problem);
    }
  }
  return result;
}

Exam load_exam(const std::string& path, const std::string& name) {
  ProblemSet set = load_problem_set(path, name.empty() ? path : name);
  Exam exam;
  exam.name = set.name;
  exam.problems = std::move(set.problems);
  return exam;
}

void write_exam(const Exam& exam, const std::string& path) {
  ProblemSet set;
  set.name = exam.name;
  set.problems = exam.problems;
  write_problem_set(set, path);
}

ExamManifest manifest_for(const Exam& exam, std::uint64_t seed) {
  ExamManifest manifest;
  manifest.name = exam.name;
  manifest.seed = seed;
  for (const auto& problem : exam.problems) {
    manifest.problems.emplace_back(problem.source, problem.source_id);
  }
  return manifest;
}

std::string serialize_exam_manifest(const ExamManifest& manifest) {
  ordered_json obj;
  obj["name"] = manifest.name;
  obj["seed"] = manifest.seed;
  ordered_json list = ordered_json::array();
  for (const auto& [source, source_id] : manifest.problems) {
    ordered_json entry;
    entry["source"] = source;
    entry["source_id"] = source_id;
    list.push_back(entry);
  }
  obj["problems"] = list;
  return obj.dump(2) + "\n";
}

ExamManifest parse_exam_manifest(const std::string& text) {
  ordered_json obj = ordered_json::parse(text, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) throw CorpusError("malformed exam manifest");
  ExamManifest manifest;
  manifest.name = obj.value("name", std::string());
  manifest.seed = obj.value("seed", std::uint64_t{0});
  if (!obj.contains("problems") || !obj.at("problems").is_array()) {
    throw CorpusError("exam manifest missing 'problems' array");
  }
  for (const auto& entry : obj.at("problems")) {
    manifest.problems.emplace_back(entry.at("source").get<std::string>(),
                                   entry.at("source_id").get<std::int64_t>());
  }
  return manifest;
}

Exam reconstruct_exam(const ExamManifest& manifest, const std::vector<ProblemSet>& sets) {
  std::map<std::string, const Problem*> by_identity;
  for (const auto& set : sets) {
    for (const auto& problem : set.problems) {
      by_identity[problem.identity()] = &problem;
    }
  }
  Exam exam;
  exam.name = manifest.name;
  for (const auto& [source, source_id] : manifest.problems) {
    std::string identity = source + "#" + std::to_string(source_id);
    auto it = by_identity.find(identity);
    if (it == by_identity.end()) {
      throw CorpusError("exam manifest references unknown problem " + identity);
    }
    exam.problems.push_back(*it->second);
  }
  return exam;
}

}  // namespace reflect

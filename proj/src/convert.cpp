#include "reflect/convert.hpp"

#include <functional>

#include "json.hpp"
#include "reflect/jsonl.hpp"
#include "reflect/util.hpp"

namespace reflect {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string label_for_index(std::size_t index) {
  return std::string(1, static_cast<char>('A' + index));
}

// ARC: {"id", "question": {"stem", "choices": [{"text", "label"}]}, "answerKey"}
bool convert_arc(const ordered_json& row, Problem& problem, std::string& why) {
  if (!row.contains("question") || !row.at("question").is_object()) {
    why = "missing question object";
    return false;
  }
  const auto& question = row.at("question");
  problem.question = question.value("stem", std::string());
  if (problem.question.empty()) {
    why = "empty question stem";
    return false;
  }
  if (!question.contains("choices") || !question.at("choices").is_array()) {
    why = "missing choices";
    return false;
  }
  for (const auto& choice : question.at("choices")) {
    std::string label = choice.value("label", std::string());
    std::string text = choice.value("text", std::string());
    if (label.empty() || text.empty()) {
      why = "choice without label or text";
      return false;
    }
    problem.choices.push_back({label, text});
  }
  problem.answer = row.value("answerKey", std::string());
  if (problem.answer.empty()) {
    why = "missing gold answer";
    return false;
  }
  if (row.contains("id")) problem.extras["original_id"] = row.at("id");
  return true;
}

// AGIEval: {"passage", "question", "options": ["(A)...", ...], "label"}
bool convert_agieval(const ordered_json& row, Problem& problem, std::string& why) {
  problem.context = row.value("passage", std::string());
  if (row.contains("passage") && row.at("passage").is_null()) problem.context.clear();
  problem.question = row.value("question", std::string());
  if (problem.question.empty()) {
    why = "empty question";
    return false;
  }
  if (!row.contains("options") || !row.at("options").is_array()) {
    why = "missing options";
    return false;
  }
  std::size_t index = 0;
  for (const auto& option : row.at("options")) {
    if (!option.is_string()) {
      why = "non-string option";
      return false;
    }
    std::string label = label_for_index(index);
    std::string text = trim(option.get<std::string>());
    // Strip a leading "(A)" / "A." / "A)" echo of the label.
    if (text.size() >= 3 && text[0] == '(' && text[1] == label[0] && text[2] == ')') {
      text = ltrim(text.substr(3));
    } else if (text.size() >= 2 && text[0] == label[0] && (text[1] == '.' || text[1] == ')')) {
      text = ltrim(text.substr(2));
    }
    if (text.empty()) {
      why = "empty option text";
      return false;
    }
    problem.choices.push_back({label, text});
    ++index;
  }
  if (row.contains("label") && row.at("label").is_string()) {
    problem.answer = row.at("label").get<std::string>();
  } else if (row.contains("label") && row.at("label").is_number_integer()) {
    problem.answer = label_for_index(row.at("label").get<std::size_t>());
  } else {
    why = "missing gold answer";
    return false;
  }
  return true;
}

// HellaSwag: {"ctx", "endings": [...], "label"}; numeric labels "1".."4".
bool convert_hellaswag(const ordered_json& row, Problem& problem, std::string& why) {
  problem.context = row.value("ctx", std::string());
  if (problem.context.empty()) {
    why = "empty context";
    return false;
  }
  problem.question = "Which choice is the most plausible continuation of the context?";
  if (!row.contains("endings") || !row.at("endings").is_array()) {
    why = "missing endings";
    return false;
  }
  std::size_t index = 0;
  for (const auto& ending : row.at("endings")) {
    if (!ending.is_string() || ending.get<std::string>().empty()) {
      why = "bad ending";
      return false;
    }
    problem.choices.push_back({std::to_string(index + 1), ending.get<std::string>()});
    ++index;
  }
  long label = -1;
  if (row.contains("label") && row.at("label").is_number_integer()) {
    label = row.at("label").get<long>();
  } else if (row.contains("label") && row.at("label").is_string()) {
    try {
      label = std::stol(row.at("label").get<std::string>());
    } catch (...) {
      label = -1;
    }
  }
  if (label < 0 || static_cast<std::size_t>(label) >= problem.choices.size()) {
    why = "missing or out-of-range gold label";
    return false;
  }
  problem.answer = std::to_string(label + 1);
  return true;
}

// MedMCQA: {"question", "opa".."opd", "cop"} with 0-based cop.
bool convert_medmcqa(const ordered_json& row, Problem& problem, std::string& why) {
  problem.question = row.value("question", std::string());
  if (problem.question.empty()) {
    why = "empty question";
    return false;
  }
  const char* option_fields[] = {"opa", "opb", "opc", "opd"};
  std::size_t index = 0;
  for (const char* field : option_fields) {
    if (row.contains(field) && row.at(field).is_string() &&
        !row.at(field).get<std::string>().empty()) {
      problem.choices.push_back({label_for_index(index), row.at(field).get<std::string>()});
    }
    ++index;
  }
  if (problem.choices.size() < 2) {
    why = "fewer than two options";
    return false;
  }
  if (!row.contains("cop") || !row.at("cop").is_number_integer()) {
    why = "missing gold answer";
    return false;
  }
  long cop = row.at("cop").get<long>();
  if (cop < 0 || static_cast<std::size_t>(cop) >= problem.choices.size()) {
    why = "gold option index out of range";
    return false;
  }
  problem.answer = problem.choices[static_cast<std::size_t>(cop)].label;
  return true;
}

using RowConverter = bool (*)(const ordered_json&, Problem&, std::string&);

RowConverter converter_for(const std::string& format) {
  std::string f = to_lower(format);
  if (f == "arc") return convert_arc;
  if (f == "agieval") return convert_agieval;
  if (f == "hellaswag") return convert_hellaswag;
  if (f == "medmcqa") return convert_medmcqa;
  return nullptr;
}

}  // namespace

std::vector<std::string> known_formats() { return {"arc", "agieval", "hellaswag", "medmcqa"}; }

ConversionReport convert_file(const std::string& input_path, const std::string& format,
                              const std::string& source_name, const std::string& topic,
                              const std::string& output_path) {
  RowConverter converter = converter_for(format);
  if (!converter) {
    throw std::invalid_argument("unknown source format '" + format + "'; known formats: " +
                                join(known_formats(), ", "));
  }

  ConversionReport report;
  std::string text = read_text_file(input_path);
  std::string out;
  std::size_t line_number = 0;
  std::int64_t next_id = 1;
  for (const auto& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    ++line_number;
    ordered_json row = ordered_json::parse(line, nullptr, false);
    std::string why;
    Problem problem;
    problem.source = source_name;
    problem.topic = topic;
    bool ok = !row.is_discarded() && row.is_object() && converter(row, problem, why);
    if (row.is_discarded()) why = "malformed JSON";
    if (ok) {
      problem.source_id = next_id++;
      // The converted line must itself pass the standard parser.
      std::string serialized = serialize_problem(problem);
      try {
        parse_problem(serialized, line_number);
      } catch (const CorpusError& e) {
        ok = false;
        why = e.what();
        --next_id;
      }
      if (ok) {
        out += serialized;
        out += '\n';
        ++report.converted;
        continue;
      }
    }
    ++report.skipped;
    report.messages.push_back(input_path + ": row " + std::to_string(line_number) +
                              " skipped: " + why);
  }
  write_text_file(output_path, out);
  return report;
}

}  // namespace reflect

#include "reflect/prompts.hpp"

#include <filesystem>

#include "reflect/jsonl.hpp"
#include "reflect/util.hpp"

namespace reflect {

namespace {

constexpr const char* kAnswerSystem =
    R"__(You are an expert in {{topic}}.
Your task is to answer the following multiple-choice questions.
Think step-by-step to ensure you have the correct answer.
Then, answer the question using the following format 'Action: Answer("[choice]")'
The parameter [choice] is the letter or number of the answer you want to select (e.g. "A", "B", "C", or "D")
For example, 'Answer("C")' will select the choice "C" as the best answer.
You MUST select one of the available choices; the answer CANNOT be "None of the Above".
Be concise in your response but include any essential information.)__";

constexpr const char* kExampleProblem =
    R"__(Topic: Geography
Question: What is the capital of the state where Johns Hopkins University is located?
Choices:
  A: Baltimore
  B: Annapolis
  C: Des Moines
  D: Las Vegas)__";

constexpr const char* kExampleSolution =
    R"__(Thought:
Johns Hopkins University is located in Baltimore, Maryland.
The capital of Maryland is Annapolis.
Action: Answer("B"))__";

constexpr const char* kReflectSystem =
    R"__(You are an expert in {{topic}}.
You have incorrectly answered the following multiple-choice question.
Your task is to reflect on the problem, your solution, and the correct answer.
You will then use this information help you answer the same question in the future.
First, explain why you answered the question incorrectly.
Second, list the keywords that describe the type of your errors from most general to most specific.
Third, solve the problem again, step-by-step, based on your knowledge of the correct answer.
Fourth, create a list of detailed instructions to help you correctly solve this problem in the future.
Finally, create a list of general advice to help you solve similar types of problems in the future.
Be concise in your response; however, capture all of the essential information.
For guidance, I will provide you with a single generic example problem and reflection (below).)__";

constexpr const char* kReflectExampleInput =
    R"__(Topic: Geography and Math
Question: What is the product of the number of letters contained in the name of the city where Iowa State University is located multiplied by the number of letters contained in the name of the state?
Choices:
  A: 16
  B: 20
  C: 24
  D: 32
Thought:
Iowa State University is located in the city of Ames
ISU is located in the state of Iowa.
Action: Answer("D")
---
Correct Answer: A)__";

constexpr const char* kReflectExampleOutput =
    R"__(Explanation:
I miscalculated the product of the number of letters in the city and state names.
The gap in my knowledge was not in geography but in basic arithmetic.
I knew the correct city and state but made a calculation error.
Error Keywords:
 - Calculation error
 - Arithmetic error
 - Multiplication error
Solution:
Iowa State University is located in the city of Ames
Iowa State University is located in the state of Iowa.
The city name "Ames" contains 4 letters.
The state name "Iowa" contains 4 letters.
The product of 4*4 is 16.
Instructions:
1. Identify the city where the university is located.
2. Identify the state where the university is located.
3. Count the number of letters in the name of the city.
4. Count the number of letters in the name of the state.
5. Multiply the number of letters in the city by the number of letters in the state.
6. Work step-by-step through your mathematical calculations.
7. Double-check your calculations to ensure accuracy.
8. Choose the answer that matches your calculated result.
Advice:
 - Always read the question carefully and understand the problem.
 - Always decompose complex problems into multiple simple steps.
 - Always think through each subproblem step-by-step.
 - Never skip any steps; be explicit in each step of your reasoning.
 - Always double-check your calculations and final answer.
 - Remember that the product of two numbers is the result of multiplying them together, not adding them.)__";

constexpr const char* kReflectionBlock =
    R"__(Reflection:
You previously answered this question incorrectly.
Then you reflected on the problem, your solution, and the correct answer.
Use your self-reflection (below) to help you answer this question.
Any information that you are not allowed to see will be marked [REDACTED].
{{reflection}})__";

std::string substitute(std::string text, std::string_view placeholder, std::string_view value) {
  return replace_all(std::move(text), placeholder, value);
}

void check_fully_rendered(const std::string& text, const char* what) {
  if (text.find("{{") != std::string::npos) {
    throw RenderError(std::string("unbound placeholder remains in rendered ") + what);
  }
}

std::vector<ChatMessage> finish(std::string system_text, std::string user_text) {
  check_fully_rendered(system_text, "system prompt");
  check_fully_rendered(user_text, "user prompt");
  return {{Role::system, std::move(system_text)}, {Role::user, std::move(user_text)}};
}

// Template files use the same bracketed block headers the rendered prompts do.
std::vector<std::pair<std::string, std::string>> parse_blocks(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> blocks;
  for (const auto& line : split_lines(text)) {
    std::string stripped = trim(line);
    if (stripped.size() >= 2 && stripped.front() == '[' && stripped.back() == ']') {
      blocks.emplace_back(stripped.substr(1, stripped.size() - 2), "");
      continue;
    }
    if (blocks.empty()) continue;
    blocks.back().second += line;
    blocks.back().second += '\n';
  }
  for (auto& [name, body] : blocks) body = trim(body);
  return blocks;
}

PromptTemplate template_from_blocks(TemplateKind kind,
                                    const std::vector<std::pair<std::string, std::string>>& blocks,
                                    const std::string& path) {
  PromptTemplate tpl;
  tpl.kind = kind;
  for (const auto& [name, body] : blocks) {
    if (iequals(name, "System Prompt")) {
      tpl.system_text = body;
    } else {
      tpl.example_blocks.push_back(body);
    }
  }
  if (tpl.system_text.empty()) {
    throw RenderError(path + ": template has no [System Prompt] block");
  }
  return tpl;
}

}  // namespace

const TemplateSet& default_templates() {
  static const TemplateSet templates = [] {
    TemplateSet t;
    t.answer = {TemplateKind::answer, kAnswerSystem, {kExampleProblem, kExampleSolution}};
    t.reflect = {TemplateKind::reflect, kReflectSystem,
                 {kReflectExampleInput, kReflectExampleOutput}};
    t.reanswer = {TemplateKind::reanswer, kAnswerSystem,
                  {kExampleProblem, kExampleSolution, kReflectionBlock}};
    return t;
  }();
  return templates;
}

TemplateSet load_templates(const std::string& dir) {
  TemplateSet templates = default_templates();
  auto load_if_present = [&](const char* file, TemplateKind kind, PromptTemplate* slot) {
    std::filesystem::path path = std::filesystem::path(dir) / file;
    if (!file_exists(path.string())) return;
    *slot = template_from_blocks(kind, parse_blocks(read_text_file(path.string())), path.string());
  };
  load_if_present("answer.txt", TemplateKind::answer, &templates.answer);
  load_if_present("reflect.txt", TemplateKind::reflect, &templates.reflect);
  load_if_present("reanswer.txt", TemplateKind::reanswer, &templates.reanswer);
  return templates;
}

std::string format_problem_block(const Problem& problem) {
  std::string out = "Topic: " + problem.topic + "\n";
  if (!problem.context.empty()) {
    out += "Context: " + problem.context + "\n";
  }
  out += "Question: " + problem.question + "\n";
  out += "Choices:";
  for (const auto& choice : problem.choices) {
    out += "\n  " + choice.label + ": " + choice.description;
  }
  return out;
}

std::vector<ChatMessage> render_answer_prompt(const Problem& problem,
                                              const TemplateSet& templates) {
  const PromptTemplate& tpl = templates.answer;
  std::string system_text = substitute(tpl.system_text, "{{topic}}", problem.topic);
  std::string user_text;
  if (tpl.example_blocks.size() >= 2) {
    user_text += "[Example Problem]\n" + tpl.example_blocks[0] + "\n\n";
    user_text += "[Example Solution]\n" + tpl.example_blocks[1] + "\n\n";
  }
  user_text += "[Problem]\n" + format_problem_block(problem);
  return finish(std::move(system_text), std::move(user_text));
}

std::vector<ChatMessage> render_reflection_prompt(const Problem& problem,
                                                  const std::string& failed_attempt_text,
                                                  const TemplateSet& templates) {
  const PromptTemplate& tpl = templates.reflect;
  std::string system_text = substitute(tpl.system_text, "{{topic}}", problem.topic);
  std::string user_text;
  if (tpl.example_blocks.size() >= 2) {
    user_text += "[Example Input]\n" + tpl.example_blocks[0] + "\n\n";
    user_text += "[Example Output]\n" + tpl.example_blocks[1] + "\n\n";
  }
  user_text += "[Input]\n" + format_problem_block(problem) + "\n";
  std::string failed = rtrim(failed_attempt_text);
  if (!failed.empty()) {
    user_text += failed + "\n";
  }
  user_text += "---\nCorrect Answer: " + problem.answer;
  return finish(std::move(system_text), std::move(user_text));
}

std::vector<ChatMessage> render_reanswer_prompt(const Problem& problem,
                                                const std::string& reflection_payload,
                                                const TemplateSet& templates) {
  const PromptTemplate& tpl = templates.reanswer;
  std::string system_text = substitute(tpl.system_text, "{{topic}}", problem.topic);
  std::string user_text;
  if (tpl.example_blocks.size() >= 3) {
    user_text += "[Example Problem]\n" + tpl.example_blocks[0] + "\n\n";
    user_text += "[Example Solution]\n" + tpl.example_blocks[1] + "\n\n";
    std::string reflection_block =
        substitute(tpl.example_blocks[2], "{{reflection}}", reflection_payload);
    user_text += "[Reflection Prompt]\n" + rtrim(reflection_block) + "\n\n";
  }
  user_text += "[Problem]\n" + format_problem_block(problem);
  return finish(std::move(system_text), std::move(user_text));
}

std::string to_string(ExtractError error) {
  switch (error) {
    case ExtractError::none: return "";
    case ExtractError::no_action: return "no_action";
    case ExtractError::invalid_label: return "invalid_label";
  }
  return "";
}

namespace {

// Straight quotes plus the UTF-8 curly variants models sometimes emit.
const char* kQuotes[] = {"\"", "'", "“", "”", "‘", "’"};

std::size_t match_quote(const std::string& text, std::size_t pos) {
  for (const char* quote : kQuotes) {
    std::size_t len = std::char_traits<char>::length(quote);
    if (text.compare(pos, len, quote) == 0) return len;
  }
  return 0;
}

std::size_t skip_spaces(const std::string& text, std::size_t pos) {
  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  return pos;
}

// Matches Answer ( "LABEL" ) starting at `pos` (which points at 'A' of
// "Answer"); quotes are optional but must pair up.
std::optional<std::pair<std::string, std::size_t>> match_answer_action(const std::string& text,
                                                                       std::size_t pos) {
  static constexpr std::string_view kWord = "Answer";
  if (text.compare(pos, kWord.size(), kWord) != 0) return std::nullopt;
  std::size_t i = skip_spaces(text, pos + kWord.size());
  if (i >= text.size() || text[i] != '(') return std::nullopt;
  i = skip_spaces(text, i + 1);
  std::size_t open_len = match_quote(text, i);
  i += open_len;
  std::size_t label_start = i;
  while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
  if (i == label_start) return std::nullopt;
  std::string label = text.substr(label_start, i - label_start);
  std::size_t close_len = match_quote(text, i);
  if ((open_len > 0) != (close_len > 0)) return std::nullopt;
  i = skip_spaces(text, i + close_len);
  if (i >= text.size() || text[i] != ')') return std::nullopt;
  return std::make_pair(std::move(label), i + 1);
}

}  // namespace

ExtractResult extract_choice(const std::string& completion_text,
                             const std::vector<std::string>& valid_labels) {
  ExtractResult result;
  bool pattern_seen = false;
  std::optional<std::string> last_valid;
  std::size_t pos = 0;
  while ((pos = completion_text.find("Answer", pos)) != std::string::npos) {
    auto match = match_answer_action(completion_text, pos);
    if (!match) {
      ++pos;
      continue;
    }
    pattern_seen = true;
    const auto& [label, end] = *match;
    for (const auto& valid : valid_labels) {
      if (label == valid) {
        last_valid = label;
        break;
      }
    }
    pos = end;
  }
  if (last_valid) {
    result.action = ChoiceAction{*last_valid};
  } else {
    result.error = pattern_seen ? ExtractError::invalid_label : ExtractError::no_action;
  }
  return result;
}

}  // namespace reflect

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reflect/corpus.hpp"
#include "reflect/gateway.hpp"

namespace reflect {

class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TemplateKind { answer, reflect, reanswer };

/// A prompt template: the system text plus the fixed few-shot blocks.
/// Placeholders are {{topic}} in system text and {{reflection}} inside the
/// re-answer template's reflection block.
struct PromptTemplate {
  TemplateKind kind = TemplateKind::answer;
  std::string system_text;
  std::vector<std::string> example_blocks;
};

struct TemplateSet {
  PromptTemplate answer;
  PromptTemplate reflect;
  PromptTemplate reanswer;
};

/// Built-in templates (the answer / self-reflection / re-answer prompts with
/// the fixed geography few-shot example).
const TemplateSet& default_templates();

/// Loads answer.txt / reflect.txt / reanswer.txt overrides from a directory.
/// Files use "[Block Name]" section headers; missing files fall back to the
/// built-in template.
TemplateSet load_templates(const std::string& dir);

/// The "Topic/Context/Question/Choices" layout shared by every prompt; the
/// context line is elided when the problem has no context.
std::string format_problem_block(const Problem& problem);

std::vector<ChatMessage> render_answer_prompt(const Problem& problem,
                                              const TemplateSet& templates = default_templates());

/// failed_attempt_text is the incorrect chain of thought plus its answer
/// action, included verbatim ahead of the "Correct Answer:" line.
std::vector<ChatMessage> render_reflection_prompt(
    const Problem& problem, const std::string& failed_attempt_text,
    const TemplateSet& templates = default_templates());

std::vector<ChatMessage> render_reanswer_prompt(
    const Problem& problem, const std::string& reflection_payload,
    const TemplateSet& templates = default_templates());

struct ChoiceAction {
  std::string label;
};

enum class ExtractError { none, no_action, invalid_label };

std::string to_string(ExtractError error);

struct ExtractResult {
  std::optional<ChoiceAction> action;
  ExtractError error = ExtractError::none;

  bool ok() const { return action.has_value(); }
};

/// Finds the last Answer("X") action whose label is one of valid_labels.
/// Tolerates optional whitespace, straight or curly quotes, and a missing
/// "Action:" prefix. no_action when the pattern never appears; invalid_label
/// when it appears but never with a valid label.
ExtractResult extract_choice(const std::string& completion_text,
                             const std::vector<std::string>& valid_labels);

}  // namespace reflect

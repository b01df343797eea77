#include "reflect/reflection.hpp"

#include <algorithm>

#include "reflect/util.hpp"

namespace reflect {

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::baseline: return "baseline";
    case AgentKind::retry: return "retry";
    case AgentKind::keywords: return "keywords";
    case AgentKind::advice: return "advice";
    case AgentKind::explanation: return "explanation";
    case AgentKind::instructions: return "instructions";
    case AgentKind::solution: return "solution";
    case AgentKind::composite: return "composite";
    case AgentKind::unredacted: return "unredacted";
  }
  return "baseline";
}

std::optional<AgentKind> agent_from_string(const std::string& name) {
  for (AgentKind kind : kAllAgents) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::vector<AgentKind> reflecting_agents() {
  std::vector<AgentKind> out;
  for (AgentKind kind : kAllAgents) {
    if (kind != AgentKind::baseline) out.push_back(kind);
  }
  return out;
}

RedactionSpec RedactionSpec::for_problem(const Problem& problem) {
  RedactionSpec spec;
  for (const auto& choice : problem.choices) {
    spec.labels.push_back(choice.label);
    spec.descriptions.push_back(choice.description);
  }
  return spec;
}

// ---------------------------------------------------------------------------
// parse_reflection

namespace {

enum class SectionId { explanation, error_keywords, solution, instructions, advice };

struct HeaderSpec {
  SectionId id;
  const char* name;  // lowercase
};

constexpr HeaderSpec kHeaders[] = {
    {SectionId::explanation, "explanation"},
    {SectionId::error_keywords, "error keywords"},
    {SectionId::solution, "solution"},
    {SectionId::instructions, "instructions"},
    {SectionId::advice, "advice"},
};

// Matches a section header line, tolerating markdown decoration such as
// "## Explanation:" or "**Error Keywords:**". Returns the section plus any
// inline content after the colon.
std::optional<std::pair<SectionId, std::string>> detect_header(const std::string& line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '#' ||
                             line[i] == '*' || line[i] == '_' || line[i] == '>')) {
    ++i;
  }
  std::string lowered = to_lower(line.substr(i));
  for (const auto& header : kHeaders) {
    std::string_view name(header.name);
    if (lowered.size() < name.size() ||
        std::string_view(lowered).substr(0, name.size()) != name) {
      continue;
    }
    std::size_t j = i + name.size();
    while (j < line.size() && (line[j] == '*' || line[j] == '_' || line[j] == ' ')) ++j;
    if (j >= line.size() || line[j] != ':') continue;
    ++j;
    std::string inline_content = trim(line.substr(j));
    while (!inline_content.empty() &&
           (inline_content.back() == '*' || inline_content.back() == '_')) {
      inline_content.pop_back();
    }
    return std::make_pair(header.id, trim(inline_content));
  }
  return std::nullopt;
}

// A list-item marker: "-", "*", the bullet glyph, or "N." / "N)".
std::optional<std::size_t> marker_end(const std::string& line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i >= line.size()) return std::nullopt;
  if (line[i] == '-' || line[i] == '*') {
    std::size_t j = i + 1;
    if (j < line.size() && line[j] == ' ') return j + 1;
    if (j == line.size()) return std::nullopt;
    return std::nullopt;
  }
  if (line.compare(i, 3, "•") == 0) {
    std::size_t j = i + 3;
    if (j < line.size() && line[j] == ' ') return j + 1;
    return j;
  }
  std::size_t j = i;
  while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
  if (j > i && j < line.size() && (line[j] == '.' || line[j] == ')')) {
    ++j;
    if (j < line.size() && line[j] == ' ') ++j;
    return j;
  }
  return std::nullopt;
}

std::vector<std::string> split_items(const std::vector<std::string>& lines) {
  std::vector<std::string> items;
  bool item_open = false;
  for (const auto& line : lines) {
    if (trim(line).empty()) {
      item_open = false;
      continue;
    }
    auto after_marker = marker_end(line);
    if (after_marker) {
      items.push_back(rtrim(line.substr(*after_marker)));
      item_open = true;
      continue;
    }
    bool indented = !line.empty() && (line[0] == ' ' || line[0] == '\t');
    if (item_open && indented) {
      // Continuation of the previous item; keep the raw line so items remain
      // contiguous regions of the source text.
      items.back() += "\n" + rtrim(line);
    } else {
      items.push_back(rtrim(ltrim(line)));
      item_open = true;
    }
  }
  return items;
}

std::string join_body(const std::vector<std::string>& lines) {
  std::string body;
  for (const auto& line : lines) {
    body += line;
    body += '\n';
  }
  return trim(body);
}

}  // namespace

ReflectionSections parse_reflection(const std::string& completion_text) {
  ReflectionSections sections;
  sections.raw = completion_text;

  // Collect lines per section; the first occurrence of each header wins and
  // later duplicates read as plain content of the section in progress.
  std::vector<std::vector<std::string>> bodies(5);
  std::array<bool, 5> seen{};
  std::optional<SectionId> current;
  for (const auto& line : split_lines(completion_text)) {
    auto header = detect_header(line);
    if (header && !seen[static_cast<std::size_t>(header->first)]) {
      current = header->first;
      seen[static_cast<std::size_t>(header->first)] = true;
      if (!header->second.empty()) {
        bodies[static_cast<std::size_t>(header->first)].push_back(header->second);
      }
      continue;
    }
    if (current) {
      bodies[static_cast<std::size_t>(*current)].push_back(line);
    }
  }

  sections.explanation = join_body(bodies[static_cast<std::size_t>(SectionId::explanation)]);
  sections.error_keywords =
      split_items(bodies[static_cast<std::size_t>(SectionId::error_keywords)]);
  sections.solution = join_body(bodies[static_cast<std::size_t>(SectionId::solution)]);
  sections.instructions = split_items(bodies[static_cast<std::size_t>(SectionId::instructions)]);
  sections.advice = split_items(bodies[static_cast<std::size_t>(SectionId::advice)]);

  for (const auto& header : kHeaders) {
    if (!seen[static_cast<std::size_t>(header.id)]) {
      sections.warnings.push_back(std::string("missing section header: ") + header.name);
    }
  }
  return sections;
}

// ---------------------------------------------------------------------------
// redact

namespace {

struct Segment {
  std::string text;
  bool redacted = false;
};

std::vector<Segment> split_existing_markers(const std::string& text,
                                            const std::string& replacement) {
  std::vector<Segment> segments;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t hit = text.find(replacement, pos);
    if (hit == std::string::npos) {
      segments.push_back({text.substr(pos), false});
      break;
    }
    if (hit > pos) segments.push_back({text.substr(pos, hit - pos), false});
    segments.push_back({"", true});
    pos = hit + replacement.size();
  }
  return segments;
}

// Case-insensitive needle search inside one literal segment.
std::size_t ifind(const std::string& haystack, const std::string& lowered_needle,
                  std::size_t from) {
  if (lowered_needle.empty() || haystack.size() < lowered_needle.size()) {
    return std::string::npos;
  }
  for (std::size_t i = from; i + lowered_needle.size() <= haystack.size(); ++i) {
    std::size_t j = 0;
    while (j < lowered_needle.size() &&
           std::tolower(static_cast<unsigned char>(haystack[i + j])) ==
               static_cast<unsigned char>(lowered_needle[j])) {
      ++j;
    }
    if (j == lowered_needle.size()) return i;
  }
  return std::string::npos;
}

bool replace_description(std::vector<Segment>& segments, const std::string& description) {
  std::string lowered = to_lower(description);
  bool changed = false;
  std::vector<Segment> next;
  for (auto& segment : segments) {
    if (segment.redacted || segment.text.empty()) {
      next.push_back(std::move(segment));
      continue;
    }
    std::size_t pos = 0;
    std::size_t hit;
    while ((hit = ifind(segment.text, lowered, pos)) != std::string::npos) {
      if (hit > pos) next.push_back({segment.text.substr(pos, hit - pos), false});
      next.push_back({"", true});
      pos = hit + description.size();
      changed = true;
    }
    if (pos == 0) {
      next.push_back(std::move(segment));
    } else if (pos < segment.text.size()) {
      next.push_back({segment.text.substr(pos), false});
    }
  }
  segments = std::move(next);
  return changed;
}

// Standalone occurrences only: segment edges border either a replacement
// marker or the text boundary, both of which count as word breaks.
bool replace_label(std::vector<Segment>& segments, const std::string& label) {
  if (label.empty()) return false;
  bool changed = false;
  std::vector<Segment> next;
  for (auto& segment : segments) {
    if (segment.redacted || segment.text.empty()) {
      next.push_back(std::move(segment));
      continue;
    }
    const std::string& text = segment.text;
    std::size_t pos = 0;
    std::size_t emitted = 0;
    while ((pos = text.find(label, pos)) != std::string::npos) {
      bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
      std::size_t end = pos + label.size();
      bool right_ok = end == text.size() || !is_word_char(text[end]);
      if (!left_ok || !right_ok) {
        ++pos;
        continue;
      }
      if (pos > emitted) next.push_back({text.substr(emitted, pos - emitted), false});
      next.push_back({"", true});
      emitted = end;
      pos = end;
      changed = true;
    }
    if (emitted == 0) {
      next.push_back(std::move(segment));
    } else if (emitted < text.size()) {
      next.push_back({text.substr(emitted), false});
    }
  }
  segments = std::move(next);
  return changed;
}

}  // namespace

std::string redact(const std::string& text, const RedactionSpec& spec) {
  std::vector<Segment> segments = split_existing_markers(text, spec.replacement);

  std::vector<std::string> descriptions;
  for (const auto& description : spec.descriptions) {
    if (!description.empty()) descriptions.push_back(description);
  }
  // Longest first so a description embedded in a longer one cannot shadow it.
  std::stable_sort(descriptions.begin(), descriptions.end(),
                   [](const std::string& a, const std::string& b) { return a.size() > b.size(); });

  // Each replacement consumes at least one literal character, so the loop
  // reaches a fixed point.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& description : descriptions) {
      changed = replace_description(segments, description) || changed;
    }
    for (const auto& label : spec.labels) {
      changed = replace_label(segments, label) || changed;
    }
  }

  std::string out;
  for (const auto& segment : segments) {
    out += segment.redacted ? spec.replacement : segment.text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// build_payload

namespace {

std::string bullet_list(const std::string& header, const std::vector<std::string>& items) {
  if (items.empty()) return "";
  std::string out = header;
  for (const auto& item : items) out += "\n - " + item;
  return out;
}

std::string numbered_list(const std::string& header, const std::vector<std::string>& items) {
  if (items.empty()) return "";
  std::string out = header;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += "\n" + std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

std::string text_section(const std::string& header, const std::string& body) {
  if (body.empty()) return "";
  return header + "\n" + body;
}

std::string all_sections(const ReflectionSections& sections) {
  std::vector<std::string> parts;
  for (std::string part : {text_section("Explanation:", sections.explanation),
                           bullet_list("Error Keywords:", sections.error_keywords),
                           text_section("Solution:", sections.solution),
                           numbered_list("Instructions:", sections.instructions),
                           bullet_list("Advice:", sections.advice)}) {
    if (!part.empty()) parts.push_back(std::move(part));
  }
  return join(parts, "\n");
}

}  // namespace

std::string build_payload(AgentKind kind, const ReflectionSections& sections,
                          const RedactionSpec& spec) {
  switch (kind) {
    case AgentKind::baseline:
      throw std::invalid_argument("the baseline agent carries no reflection payload");
    case AgentKind::retry:
      // The re-answer preamble alone tells the agent it was wrong.
      return "";
    case AgentKind::keywords:
      return redact(bullet_list("Error Keywords:", sections.error_keywords), spec);
    case AgentKind::advice:
      return redact(bullet_list("Advice:", sections.advice), spec);
    case AgentKind::explanation:
      return redact(text_section("Explanation:", sections.explanation), spec);
    case AgentKind::instructions:
      return redact(numbered_list("Instructions:", sections.instructions), spec);
    case AgentKind::solution:
      return redact(text_section("Solution:", sections.solution), spec);
    case AgentKind::composite:
      return redact(all_sections(sections), spec);
    case AgentKind::unredacted:
      return all_sections(sections);
  }
  return "";
}

// ---------------------------------------------------------------------------
// scan_for_leakage
//
// Deliberately plain find-and-compare logic, sharing nothing with redact()
// above, so it can vouch for redaction output.

std::vector<LeakFinding> scan_for_leakage(const std::string& text, const RedactionSpec& spec) {
  // Blank out replacement markers in place (same length, so offsets hold).
  std::string masked = text;
  std::size_t pos = 0;
  while ((pos = masked.find(spec.replacement, pos)) != std::string::npos) {
    for (std::size_t i = 0; i < spec.replacement.size(); ++i) masked[pos + i] = '\x1f';
    pos += spec.replacement.size();
  }

  std::vector<LeakFinding> findings;
  std::string lowered = to_lower(masked);
  for (const auto& description : spec.descriptions) {
    if (description.empty()) continue;
    std::string needle = to_lower(description);
    std::size_t at = 0;
    while ((at = lowered.find(needle, at)) != std::string::npos) {
      findings.push_back({LeakFinding::Kind::description, description, at});
      at += 1;
    }
  }
  for (const auto& label : spec.labels) {
    if (label.empty()) continue;
    std::size_t at = 0;
    while ((at = masked.find(label, at)) != std::string::npos) {
      bool left_ok = at == 0 || !is_word_char(masked[at - 1]);
      std::size_t end = at + label.size();
      bool right_ok = end == masked.size() || !is_word_char(masked[end]);
      if (left_ok && right_ok) {
        findings.push_back({LeakFinding::Kind::label, label, at});
      }
      at += 1;
    }
  }
  return findings;
}

}  // namespace reflect

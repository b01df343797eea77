#include "reflect/pipeline.hpp"

#include <filesystem>
#include <set>

#include "reflect/jsonl.hpp"
#include "reflect/parallel.hpp"
#include "reflect/util.hpp"

namespace reflect {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json gateway_error_to_json(const GatewayError& error) {
  ordered_json obj;
  obj["kind"] = to_string(error.kind);
  obj["detail"] = error.detail;
  obj["retryable"] = error.retryable;
  return obj;
}

GatewayError gateway_error_from_json(const ordered_json& obj) {
  GatewayError error;
  auto kind = error_kind_from_string(obj.value("kind", std::string()));
  error.kind = kind.value_or(ErrorKind::provider_rejection);
  error.detail = obj.value("detail", std::string());
  error.retryable = obj.value("retryable", false);
  return error;
}

ordered_json call_record_to_json(const CallRecord& call) {
  ordered_json obj;
  obj["key"] = call.key.str();
  obj["attempt"] = call.attempt;
  obj["outcome"] = call.outcome;
  obj["latency_ms"] = call.latency_ms;
  obj["detail"] = call.detail;
  return obj;
}

}  // namespace

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::correct: return "correct";
    case Verdict::incorrect: return "incorrect";
    case Verdict::erred: return "erred";
  }
  return "incorrect";
}

std::optional<Verdict> verdict_from_string(const std::string& name) {
  if (name == "correct") return Verdict::correct;
  if (name == "incorrect") return Verdict::incorrect;
  if (name == "erred") return Verdict::erred;
  return std::nullopt;
}

ordered_json attempt_to_json(const Attempt& attempt) {
  ordered_json obj;
  obj["source"] = attempt.source;
  obj["source_id"] = attempt.source_id;
  obj["phase"] = attempt.phase;
  obj["agent"] = to_string(attempt.agent);
  obj["raw_text"] = attempt.raw_text;
  if (attempt.choice) {
    obj["choice"] = *attempt.choice;
  } else {
    obj["choice"] = nullptr;
  }
  obj["verdict"] = to_string(attempt.verdict);
  obj["extract_error"] = attempt.extract_error;
  obj["error"] = attempt.error ? gateway_error_to_json(*attempt.error) : ordered_json(nullptr);
  return obj;
}

Attempt attempt_from_json(const ordered_json& record) {
  Attempt attempt;
  attempt.source = record.at("source").get<std::string>();
  attempt.source_id = record.at("source_id").get<std::int64_t>();
  attempt.phase = record.value("phase", std::string("baseline"));
  attempt.agent = agent_from_string(record.value("agent", std::string("baseline")))
                      .value_or(AgentKind::baseline);
  attempt.raw_text = record.value("raw_text", std::string());
  if (record.contains("choice") && record.at("choice").is_string()) {
    attempt.choice = record.at("choice").get<std::string>();
  }
  attempt.verdict =
      verdict_from_string(record.value("verdict", std::string())).value_or(Verdict::incorrect);
  attempt.extract_error = record.value("extract_error", std::string());
  if (record.contains("error") && record.at("error").is_object()) {
    attempt.error = gateway_error_from_json(record.at("error"));
  }
  return attempt;
}

ordered_json reflection_record_to_json(const ReflectionRecord& record) {
  ordered_json obj;
  obj["source"] = record.source;
  obj["source_id"] = record.source_id;
  obj["raw"] = record.raw;
  ordered_json sections;
  sections["explanation"] = record.sections.explanation;
  sections["error_keywords"] = record.sections.error_keywords;
  sections["solution"] = record.sections.solution;
  sections["instructions"] = record.sections.instructions;
  sections["advice"] = record.sections.advice;
  sections["warnings"] = record.sections.warnings;
  obj["sections"] = sections;
  obj["payloads"] = record.payloads;
  obj["scanner_clean"] = record.scanner_clean;
  obj["error"] = record.error ? gateway_error_to_json(*record.error) : ordered_json(nullptr);
  return obj;
}

ReflectionRecord reflection_record_from_json(const ordered_json& record) {
  ReflectionRecord out;
  out.source = record.at("source").get<std::string>();
  out.source_id = record.at("source_id").get<std::int64_t>();
  out.raw = record.value("raw", std::string());
  if (record.contains("sections")) {
    const auto& sections = record.at("sections");
    out.sections.explanation = sections.value("explanation", std::string());
    out.sections.error_keywords =
        sections.value("error_keywords", std::vector<std::string>());
    out.sections.solution = sections.value("solution", std::string());
    out.sections.instructions = sections.value("instructions", std::vector<std::string>());
    out.sections.advice = sections.value("advice", std::vector<std::string>());
    out.sections.warnings = sections.value("warnings", std::vector<std::string>());
    out.sections.raw = out.raw;
  }
  if (record.contains("payloads")) {
    for (const auto& [agent, payload] : record.at("payloads").items()) {
      out.payloads[agent] = payload.get<std::string>();
    }
  }
  if (record.contains("scanner_clean")) {
    for (const auto& [agent, clean] : record.at("scanner_clean").items()) {
      out.scanner_clean[agent] = clean.get<bool>();
    }
  }
  if (record.contains("error") && record.at("error").is_object()) {
    out.error = gateway_error_from_json(record.at("error"));
  }
  return out;
}

bool RunManifest::complete() const {
  if (!baseline_done || !reflect_done) return false;
  for (AgentKind agent : agents) {
    auto it = reanswer_done.find(to_string(agent));
    if (it == reanswer_done.end() || !it->second) return false;
  }
  return true;
}

ordered_json manifest_to_json(const RunManifest& manifest) {
  ordered_json obj;
  obj["run_id"] = manifest.run_id;
  obj["exam"] = ordered_json{{"name", manifest.exam_name}, {"path", manifest.exam_path}};
  obj["model_id"] = manifest.model_id;
  ordered_json agents = ordered_json::array();
  for (AgentKind agent : manifest.agents) agents.push_back(to_string(agent));
  obj["agents"] = agents;
  obj["seed"] = manifest.seed;
  obj["config_digest"] = manifest.config_digest;
  obj["tool_version"] = manifest.tool_version;
  ordered_json phases;
  phases["baseline"] = manifest.baseline_done;
  phases["reflect"] = manifest.reflect_done;
  phases["reanswer"] = manifest.reanswer_done;
  obj["phases"] = phases;
  return obj;
}

RunManifest manifest_from_json(const ordered_json& doc) {
  RunManifest manifest;
  manifest.run_id = doc.value("run_id", std::string());
  if (doc.contains("exam")) {
    manifest.exam_name = doc.at("exam").value("name", std::string());
    manifest.exam_path = doc.at("exam").value("path", std::string());
  }
  manifest.model_id = doc.value("model_id", std::string());
  if (doc.contains("agents")) {
    for (const auto& name : doc.at("agents")) {
      auto agent = agent_from_string(name.get<std::string>());
      if (agent) manifest.agents.push_back(*agent);
    }
  }
  manifest.seed = doc.value("seed", std::uint64_t{0});
  manifest.config_digest = doc.value("config_digest", std::string());
  manifest.tool_version = doc.value("tool_version", std::string());
  if (doc.contains("phases")) {
    const auto& phases = doc.at("phases");
    manifest.baseline_done = phases.value("baseline", false);
    manifest.reflect_done = phases.value("reflect", false);
    if (phases.contains("reanswer")) {
      for (const auto& [agent, done] : phases.at("reanswer").items()) {
        manifest.reanswer_done[agent] = done.get<bool>();
      }
    }
  }
  return manifest;
}

std::vector<Attempt> load_attempts(const std::string& path) {
  std::vector<Attempt> attempts;
  for (const auto& record : read_jsonl(path)) attempts.push_back(attempt_from_json(record));
  return attempts;
}

std::vector<ReflectionRecord> load_reflections(const std::string& path) {
  std::vector<ReflectionRecord> records;
  for (const auto& record : read_jsonl(path)) {
    records.push_back(reflection_record_from_json(record));
  }
  return records;
}

RunManifest load_manifest(const std::string& path) {
  ordered_json doc = ordered_json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded()) throw std::runtime_error("malformed manifest: " + path);
  return manifest_from_json(doc);
}

// ---------------------------------------------------------------------------
// Runner

Runner::Runner(RunPaths paths, RunManifest manifest, Exam exam, ModelConfig model,
               std::shared_ptr<Backend> backend, TemplateSet templates, RunnerOptions options)
    : paths_(std::move(paths)),
      manifest_(std::move(manifest)),
      exam_(std::move(exam)),
      model_(std::move(model)),
      templates_(std::move(templates)),
      options_(std::move(options)),
      gateway_(std::move(backend), options_.retry, options_.sleep) {
  if (exam_.problems.empty()) throw std::invalid_argument("exam is empty");
  std::filesystem::create_directories(paths_.root);
  if (!file_exists(paths_.manifest_path())) save_manifest();
}

void Runner::save_manifest() const {
  write_text_file_atomic(paths_.manifest_path(), manifest_to_json(manifest_).dump(2) + "\n");
}

GatewayResult Runner::complete_request(const RequestKey& key, std::vector<ChatMessage> messages) {
  ChatRequest request;
  request.key = key;
  request.messages = std::move(messages);
  request.config = model_;
  return gateway_.complete(request);
}

Attempt Runner::attempt_from_outcome(const Problem& problem, const std::string& phase,
                                     AgentKind agent, const BackendResult& outcome) const {
  Attempt attempt;
  attempt.source = problem.source;
  attempt.source_id = problem.source_id;
  attempt.phase = phase;
  attempt.agent = agent;
  if (const auto* error = std::get_if<GatewayError>(&outcome)) {
    attempt.verdict = Verdict::erred;
    attempt.error = *error;
    return attempt;
  }
  attempt.raw_text = std::get<Completion>(outcome).text;
  ExtractResult extracted = extract_choice(attempt.raw_text, problem.labels());
  if (extracted.ok()) {
    attempt.choice = extracted.action->label;
    attempt.verdict =
        extracted.action->label == problem.answer ? Verdict::correct : Verdict::incorrect;
  } else {
    attempt.verdict = Verdict::incorrect;
    attempt.extract_error = to_string(extracted.error);
  }
  return attempt;
}

namespace {

// Reads the valid prefix of a phase artifact, dropping a corrupt tail so the
// phase resumes from the last intact record.
template <typename T>
std::vector<T> load_phase_prefix(const std::string& path,
                                 T (*from_json)(const ordered_json&)) {
  std::vector<T> records;
  if (!file_exists(path)) return records;
  JsonlReadResult read = read_jsonl_prefix(path);
  if (read.truncated_tail) {
    truncate_file(path, read.valid_bytes);
  }
  records.reserve(read.records.size());
  for (const auto& record : read.records) records.push_back(from_json(record));
  return records;
}

}  // namespace

void Runner::run_baseline() {
  if (manifest_.baseline_done) return;

  std::vector<Attempt> existing = load_phase_prefix(paths_.baseline_path(), attempt_from_json);
  std::set<std::string> done;
  for (const auto& attempt : existing) done.insert(attempt.identity());

  std::vector<const Problem*> queue;
  for (const auto& problem : exam_.problems) {
    if (!done.count(problem.identity())) queue.push_back(&problem);
  }

  if (!queue.empty()) {
    JsonlWriter attempts_out(paths_.baseline_path());
    JsonlWriter log_out(paths_.gateway_log_path());
    std::vector<GatewayResult> results(queue.size());
    std::size_t since_commit = 0;
    ordered_parallel_for(
        queue.size(), options_.parallelism,
        [&](std::size_t i) {
          const Problem& problem = *queue[i];
          RequestKey key{model_.model_id, "baseline", problem.source, problem.source_id};
          results[i] = complete_request(key, render_answer_prompt(problem, templates_));
        },
        [&](std::size_t i) {
          const Problem& problem = *queue[i];
          Attempt attempt =
              attempt_from_outcome(problem, "baseline", AgentKind::baseline, results[i].outcome);
          attempts_out.append(attempt_to_json(attempt));
          for (const auto& call : results[i].calls) log_out.append(call_record_to_json(call));
          results[i] = GatewayResult{};  // release completion text early
          if (++since_commit >= options_.commit_batch) {
            attempts_out.commit();
            log_out.commit();
            since_commit = 0;
          }
        });
    attempts_out.commit();
    log_out.commit();
  }

  // Validate before setting the marker.
  std::vector<Attempt> all = load_attempts(paths_.baseline_path());
  if (all.size() != exam_.problems.size()) {
    throw std::runtime_error("baseline phase incomplete: " + std::to_string(all.size()) + " of " +
                             std::to_string(exam_.problems.size()) + " attempts");
  }
  manifest_.baseline_done = true;
  save_manifest();
}

std::vector<Attempt> Runner::incorrect_baseline_attempts() const {
  std::vector<Attempt> incorrect;
  for (const auto& attempt : load_attempts(paths_.baseline_path())) {
    if (attempt.verdict != Verdict::correct) incorrect.push_back(attempt);
  }
  return incorrect;
}

void Runner::run_reflect() {
  if (manifest_.reflect_done) return;
  if (!manifest_.baseline_done) throw std::runtime_error("reflect phase requires baseline");

  std::vector<Attempt> incorrect = incorrect_baseline_attempts();
  std::map<std::string, const Problem*> problems;
  for (const auto& problem : exam_.problems) problems[problem.identity()] = &problem;

  std::vector<ReflectionRecord> existing =
      load_phase_prefix(paths_.reflections_path(), reflection_record_from_json);
  std::set<std::string> done;
  for (const auto& record : existing) done.insert(record.identity());

  struct Item {
    const Problem* problem;
    const Attempt* failed;
  };
  std::vector<Item> queue;
  for (const auto& attempt : incorrect) {
    if (done.count(attempt.identity())) continue;
    queue.push_back({problems.at(attempt.identity()), &attempt});
  }

  if (!queue.empty()) {
    JsonlWriter records_out(paths_.reflections_path());
    JsonlWriter log_out(paths_.gateway_log_path());
    std::vector<GatewayResult> results(queue.size());
    std::size_t since_commit = 0;
    ordered_parallel_for(
        queue.size(), options_.parallelism,
        [&](std::size_t i) {
          const Item& item = queue[i];
          RequestKey key{model_.model_id, "reflect", item.problem->source,
                         item.problem->source_id};
          results[i] = complete_request(
              key, render_reflection_prompt(*item.problem, item.failed->raw_text, templates_));
        },
        [&](std::size_t i) {
          const Item& item = queue[i];
          ReflectionRecord record;
          record.source = item.problem->source;
          record.source_id = item.problem->source_id;
          if (const auto* error = std::get_if<GatewayError>(&results[i].outcome)) {
            record.error = *error;
            record.sections = parse_reflection("");
          } else {
            record.raw = std::get<Completion>(results[i].outcome).text;
            record.sections = parse_reflection(record.raw);
          }
          RedactionSpec spec = RedactionSpec::for_problem(*item.problem);
          for (AgentKind agent : reflecting_agents()) {
            std::string payload = build_payload(agent, record.sections, spec);
            record.scanner_clean[to_string(agent)] = scan_for_leakage(payload, spec).empty();
            record.payloads[to_string(agent)] = std::move(payload);
          }
          records_out.append(reflection_record_to_json(record));
          for (const auto& call : results[i].calls) log_out.append(call_record_to_json(call));
          results[i] = GatewayResult{};
          if (++since_commit >= options_.commit_batch) {
            records_out.commit();
            log_out.commit();
            since_commit = 0;
          }
        });
    records_out.commit();
    log_out.commit();
  }

  std::size_t have = file_exists(paths_.reflections_path())
                         ? load_reflections(paths_.reflections_path()).size()
                         : 0;
  if (have != incorrect.size()) {
    throw std::runtime_error("reflect phase incomplete: " + std::to_string(have) + " of " +
                             std::to_string(incorrect.size()) + " reflections");
  }
  manifest_.reflect_done = true;
  save_manifest();
}

void Runner::run_reanswer(AgentKind agent) {
  if (agent == AgentKind::baseline) {
    throw std::invalid_argument("the baseline agent does not re-answer");
  }
  std::string agent_name = to_string(agent);
  auto marker = manifest_.reanswer_done.find(agent_name);
  if (marker != manifest_.reanswer_done.end() && marker->second) return;
  if (!manifest_.reflect_done) throw std::runtime_error("re-answer phase requires reflections");

  std::vector<Attempt> incorrect = incorrect_baseline_attempts();
  std::map<std::string, const Problem*> problems;
  for (const auto& problem : exam_.problems) problems[problem.identity()] = &problem;
  std::map<std::string, std::string> payloads;
  if (file_exists(paths_.reflections_path())) {
    for (const auto& record : load_reflections(paths_.reflections_path())) {
      auto it = record.payloads.find(agent_name);
      payloads[record.identity()] = it == record.payloads.end() ? "" : it->second;
    }
  }

  std::string path = paths_.reanswer_path(agent);
  std::vector<Attempt> existing = load_phase_prefix(path, attempt_from_json);
  std::set<std::string> done;
  for (const auto& attempt : existing) done.insert(attempt.identity());

  std::vector<const Problem*> queue;
  for (const auto& attempt : incorrect) {
    if (!done.count(attempt.identity())) queue.push_back(problems.at(attempt.identity()));
  }

  if (!queue.empty()) {
    JsonlWriter attempts_out(path);
    JsonlWriter log_out(paths_.gateway_log_path());
    std::vector<GatewayResult> results(queue.size());
    std::size_t since_commit = 0;
    ordered_parallel_for(
        queue.size(), options_.parallelism,
        [&](std::size_t i) {
          const Problem& problem = *queue[i];
          RequestKey key{model_.model_id, "reanswer." + agent_name, problem.source,
                         problem.source_id};
          auto payload = payloads.find(problem.identity());
          results[i] = complete_request(
              key, render_reanswer_prompt(
                       problem, payload == payloads.end() ? "" : payload->second, templates_));
        },
        [&](std::size_t i) {
          const Problem& problem = *queue[i];
          Attempt attempt = attempt_from_outcome(problem, "reanswer", agent, results[i].outcome);
          attempts_out.append(attempt_to_json(attempt));
          for (const auto& call : results[i].calls) log_out.append(call_record_to_json(call));
          results[i] = GatewayResult{};
          if (++since_commit >= options_.commit_batch) {
            attempts_out.commit();
            log_out.commit();
            since_commit = 0;
          }
        });
    attempts_out.commit();
    log_out.commit();
  }

  std::size_t have = file_exists(path) ? load_attempts(path).size() : 0;
  if (have != incorrect.size()) {
    throw std::runtime_error("re-answer phase incomplete for " + agent_name + ": " +
                             std::to_string(have) + " of " + std::to_string(incorrect.size()));
  }
  manifest_.reanswer_done[agent_name] = true;
  save_manifest();
}

void Runner::execute() {
  run_baseline();
  run_reflect();
  for (AgentKind agent : manifest_.agents) run_reanswer(agent);
}

}  // namespace reflect

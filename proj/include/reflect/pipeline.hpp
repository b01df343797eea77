#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reflect/corpus.hpp"
#include "reflect/gateway.hpp"
#include "reflect/prompts.hpp"
#include "reflect/reflection.hpp"

namespace reflect {

enum class Verdict { correct, incorrect, erred };

std::string to_string(Verdict verdict);
std::optional<Verdict> verdict_from_string(const std::string& name);

/// One model answer to one problem: the raw completion, the extracted choice
/// (when any), and the scored verdict. Gateway failures surface as
/// verdict=erred with the error attached; they count as incorrect when
/// scoring.
struct Attempt {
  std::string source;
  std::int64_t source_id = 0;
  std::string phase;  // "baseline" or "reanswer"
  AgentKind agent = AgentKind::baseline;
  std::string raw_text;
  std::optional<std::string> choice;
  Verdict verdict = Verdict::incorrect;
  std::string extract_error;  // "", "no_action", "invalid_label"
  std::optional<GatewayError> error;

  std::string identity() const { return source + "#" + std::to_string(source_id); }
};

nlohmann::ordered_json attempt_to_json(const Attempt& attempt);
Attempt attempt_from_json(const nlohmann::ordered_json& record);

/// Persisted reflection for one baseline-incorrect problem: raw completion,
/// parsed sections, the eight agent payloads, and the leakage-scanner verdict
/// for each payload.
struct ReflectionRecord {
  std::string source;
  std::int64_t source_id = 0;
  std::string raw;
  ReflectionSections sections;
  std::map<std::string, std::string> payloads;
  std::map<std::string, bool> scanner_clean;
  std::optional<GatewayError> error;

  std::string identity() const { return source + "#" + std::to_string(source_id); }
};

nlohmann::ordered_json reflection_record_to_json(const ReflectionRecord& record);
ReflectionRecord reflection_record_from_json(const nlohmann::ordered_json& record);

/// Run state: a phase marker is set only once the phase's artifact file is
/// complete and validated, so interrupted runs resume from the artifacts.
struct RunManifest {
  std::string run_id;
  std::string exam_name;
  std::string exam_path;
  std::string model_id;
  std::vector<AgentKind> agents;  // reflecting agents to re-answer with
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string tool_version;
  bool baseline_done = false;
  bool reflect_done = false;
  std::map<std::string, bool> reanswer_done;

  bool complete() const;
};

nlohmann::ordered_json manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::ordered_json& doc);

/// Artifact layout inside one run directory.
struct RunPaths {
  std::string root;

  std::string manifest_path() const { return root + "/manifest.json"; }
  std::string baseline_path() const { return root + "/baseline.jsonl"; }
  std::string reflections_path() const { return root + "/reflections.jsonl"; }
  std::string reanswer_path(AgentKind agent) const {
    return root + "/reanswer." + to_string(agent) + ".jsonl";
  }
  std::string gateway_log_path() const { return root + "/gateway_log.jsonl"; }
};

struct RunnerOptions {
  int parallelism = 1;
  RetryPolicy retry;
  Gateway::SleepFn sleep;          // null = real sleep between retries
  std::size_t commit_batch = 32;   // records per fsync batch
};

/// Drives the four batch phases over one (exam, model) pair with persisted,
/// resumable state: answer -> collect incorrect -> reflect/redact ->
/// re-answer per agent. Each phase appends JSON-L records in exam order and
/// skips problems whose records already exist, so re-running a completed or
/// interrupted run issues gateway requests only for missing records. A
/// corrupt artifact tail is truncated to the last valid record and recomputed.
class Runner {
 public:
  Runner(RunPaths paths, RunManifest manifest, Exam exam, ModelConfig model,
         std::shared_ptr<Backend> backend, TemplateSet templates = default_templates(),
         RunnerOptions options = {});

  /// Executes every phase that is not yet marked complete, in order.
  void execute();

  void run_baseline();
  void run_reflect();
  void run_reanswer(AgentKind agent);

  const RunManifest& manifest() const { return manifest_; }
  const RunPaths& paths() const { return paths_; }

  /// Baseline attempts with verdict in {incorrect, erred}, in exam order.
  /// Requires the baseline phase to be complete.
  std::vector<Attempt> incorrect_baseline_attempts() const;

 private:
  void save_manifest() const;
  GatewayResult complete_request(const RequestKey& key, std::vector<ChatMessage> messages);
  Attempt attempt_from_outcome(const Problem& problem, const std::string& phase, AgentKind agent,
                               const BackendResult& outcome) const;

  RunPaths paths_;
  RunManifest manifest_;
  Exam exam_;
  ModelConfig model_;
  TemplateSet templates_;
  RunnerOptions options_;
  Gateway gateway_;
};

std::vector<Attempt> load_attempts(const std::string& path);
std::vector<ReflectionRecord> load_reflections(const std::string& path);
RunManifest load_manifest(const std::string& path);

}  // namespace reflect

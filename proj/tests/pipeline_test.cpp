#include "reflect/pipeline.hpp"

#include <numeric>

#include "doctest.h"
#include "reflect/analysis.hpp"
#include "reflect/jsonl.hpp"
#include "test_support.hpp"

using namespace reflect;

namespace {

const char* kModel = "mock-model";

ModelConfig mock_model() {
  ModelConfig model;
  model.model_id = kModel;
  model.provider = "mock";
  model.max_retries = 2;
  return model;
}

RunManifest make_manifest(const Exam& exam, std::vector<AgentKind> agents) {
  RunManifest manifest;
  manifest.run_id = "test-run";
  manifest.exam_name = exam.name;
  manifest.exam_path = "unused";
  manifest.model_id = kModel;
  manifest.agents = std::move(agents);
  manifest.config_digest = "test-digest";
  manifest.tool_version = "test";
  return manifest;
}

RunnerOptions fast_options() {
  RunnerOptions options;
  options.sleep = [](std::chrono::milliseconds) {};
  return options;
}

std::vector<std::size_t> indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

std::size_t count_phase_requests(const std::vector<std::string>& log, const std::string& phase) {
  std::size_t count = 0;
  for (const auto& key : log) {
    if (key.find("|" + phase + "|") != std::string::npos) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("an all-correct baseline leaves the incorrect queue empty") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(5);
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, indices(5), {});

  Runner runner({tmp.sub("run")}, make_manifest(exam, {AgentKind::retry}), exam, mock_model(),
                backend, default_templates(), fast_options());
  runner.execute();
  CHECK(runner.incorrect_baseline_attempts().empty());
  CHECK(count_phase_requests(backend->request_log(), "reflect") == 0);
  CHECK(count_phase_requests(backend->request_log(), "reanswer.retry") == 0);
  CHECK(runner.manifest().complete());
}

TEST_CASE("three correct of five leaves two incorrect") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(5);
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, {0, 2, 4}, {});

  Runner runner({tmp.sub("run")}, make_manifest(exam, {}), exam, mock_model(), backend,
                default_templates(), fast_options());
  runner.run_baseline();
  CHECK(runner.incorrect_baseline_attempts().size() == 2);
}

TEST_CASE("gateway failures become erred attempts and still count in the total") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(3);
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, {0, 1, 2}, {});
  // Problem 1 fails outright instead.
  backend->script({kModel, "baseline", exam.problems[1].source, exam.problems[1].source_id},
                  {{std::nullopt, ErrorKind::provider_rejection, "HTTP 400"}});

  Runner runner({tmp.sub("run")}, make_manifest(exam, {}), exam, mock_model(), backend,
                default_templates(), fast_options());
  runner.run_baseline();

  std::vector<Attempt> attempts = load_attempts(RunPaths{tmp.sub("run")}.baseline_path());
  REQUIRE(attempts.size() == 3);
  CHECK(attempts[1].verdict == Verdict::erred);
  REQUIRE(attempts[1].error.has_value());
  CHECK(attempts[1].error->kind == ErrorKind::provider_rejection);
  CHECK_FALSE(attempts[1].choice.has_value());

  ScoreSummary summary = score_baseline(attempts);
  CHECK(summary.total_base == 3);
  CHECK(summary.correct_base == 2);  // the erred question scores as incorrect

  // The erred question joins the incorrect queue for reflection.
  CHECK(runner.incorrect_baseline_attempts().size() == 1);
}

TEST_CASE("unparseable completions are incorrect with a recorded reason") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(2);
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, {1}, {});
  backend->script({kModel, "baseline", exam.problems[0].source, exam.problems[0].source_id},
                  "I am not sure.");

  Runner runner({tmp.sub("run")}, make_manifest(exam, {}), exam, mock_model(), backend,
                default_templates(), fast_options());
  runner.run_baseline();
  std::vector<Attempt> attempts = load_attempts(RunPaths{tmp.sub("run")}.baseline_path());
  CHECK(attempts[0].verdict == Verdict::incorrect);
  CHECK(attempts[0].extract_error == "no_action");
}

TEST_CASE("reflect issues one request per incorrect problem and slices payloads") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(6);
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, {0, 3}, {{AgentKind::retry, 1}});

  Runner runner({tmp.sub("run")}, make_manifest(exam, {AgentKind::retry}), exam, mock_model(),
                backend, default_templates(), fast_options());
  runner.execute();

  CHECK(count_phase_requests(backend->request_log(), "reflect") == 4);

  std::vector<ReflectionRecord> records =
      load_reflections(RunPaths{tmp.sub("run")}.reflections_path());
  REQUIRE(records.size() == 4);
  for (const auto& record : records) {
    CHECK(record.payloads.size() == 8);
    CHECK(record.payloads.at("retry").empty());
    // The synthetic reflection leaks the gold description; the composite
    // payload must be scrubbed while unredacted keeps it.
    CHECK(record.payloads.at("composite").find("[REDACTED]") != std::string::npos);
    CHECK(record.payloads.at("unredacted").find("[REDACTED]") == std::string::npos);
    CHECK(record.scanner_clean.at("composite"));
    CHECK(record.scanner_clean.at("solution"));
  }
}

TEST_CASE("a reflection with no recognizable headers records a warning and empty payloads") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(2);
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, {0}, {});
  backend->script({kModel, "reflect", exam.problems[1].source, exam.problems[1].source_id},
                  "I simply chose the wrong option.");

  Runner runner({tmp.sub("run")}, make_manifest(exam, {AgentKind::retry}), exam, mock_model(),
                backend, default_templates(), fast_options());
  runner.run_baseline();
  runner.run_reflect();

  std::vector<ReflectionRecord> records =
      load_reflections(RunPaths{tmp.sub("run")}.reflections_path());
  REQUIRE(records.size() == 1);
  CHECK_FALSE(records[0].sections.warnings.empty());
  for (const auto& [agent, payload] : records[0].payloads) CHECK(payload.empty());
}

TEST_CASE("re-answers cover exactly the baseline-incorrect problems") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(6);
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, {1, 4},
                               {{AgentKind::retry, 2}, {AgentKind::unredacted, 4}});

  Runner runner(
      {tmp.sub("run")},
      make_manifest(exam, {AgentKind::retry, AgentKind::unredacted}), exam, mock_model(),
      backend, default_templates(), fast_options());
  runner.execute();

  CHECK(count_phase_requests(backend->request_log(), "reanswer.retry") == 4);
  CHECK(count_phase_requests(backend->request_log(), "reanswer.unredacted") == 4);
  for (const auto& key : backend->request_log()) {
    // Baseline-correct problems 1 and 4 must never be re-asked.
    CHECK(key.find("reanswer.retry|synthetic/set#1") == std::string::npos);
    CHECK(key.find("reanswer.retry|synthetic/set#4") == std::string::npos);
  }

  RunData run = load_run(tmp.sub("run"));
  CHECK(validate_run(run, &exam).ok);
  ScoreSummary retry = score(pair_outcomes(run.baseline, run.reanswers[AgentKind::retry]));
  CHECK(retry.correct_base == 2);
  CHECK(retry.correct_ref == 2);
  ScoreSummary unredacted =
      score(pair_outcomes(run.baseline, run.reanswers[AgentKind::unredacted]));
  CHECK(unredacted.correct_ref == 4);
  CHECK(unredacted.accuracy_ref == 1.0);
}

TEST_CASE("resume skips completed phases entirely") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(4);
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, {0}, {{AgentKind::retry, 1}});

  RunPaths paths{tmp.sub("run")};
  {
    Runner runner(paths, make_manifest(exam, {AgentKind::retry}), exam, mock_model(), backend,
                  default_templates(), fast_options());
    runner.run_baseline();
  }
  backend->clear_request_log();
  {
    Runner runner(paths, load_manifest(paths.manifest_path()), exam, mock_model(), backend,
                  default_templates(), fast_options());
    runner.execute();
  }
  CHECK(count_phase_requests(backend->request_log(), "baseline") == 0);
  CHECK(count_phase_requests(backend->request_log(), "reflect") == 3);

  // A fully complete run resumes with zero gateway calls.
  backend->clear_request_log();
  {
    Runner runner(paths, load_manifest(paths.manifest_path()), exam, mock_model(), backend,
                  default_templates(), fast_options());
    runner.execute();
  }
  CHECK(backend->request_log().empty());
}

TEST_CASE("a truncated phase file is resumed from the last valid record") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(8);
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, {0}, {{AgentKind::retry, 3}});

  RunPaths paths{tmp.sub("run")};
  {
    Runner runner(paths, make_manifest(exam, {AgentKind::retry}), exam, mock_model(), backend,
                  default_templates(), fast_options());
    runner.execute();
  }

  // Simulate a crash mid-phase: cut the re-answer file inside record 4 and
  // roll the phase marker back (a crash would have died before setting it).
  std::string path = paths.reanswer_path(AgentKind::retry);
  JsonlReadResult whole = read_jsonl_prefix(path);
  REQUIRE(whole.records.size() == 7);
  std::string bytes = read_text_file(path);
  std::size_t cut = 0;
  for (int lines = 0; lines < 3; ++lines) cut = bytes.find('\n', cut) + 1;
  truncate_file(path, cut + 25);  // partial fourth record
  RunManifest manifest = load_manifest(paths.manifest_path());
  manifest.reanswer_done["retry"] = false;

  backend->clear_request_log();
  {
    Runner runner(paths, manifest, exam, mock_model(), backend, default_templates(),
                  fast_options());
    runner.execute();
  }
  // Only the four missing problems are re-requested.
  CHECK(backend->request_log().size() == 4);
  CHECK(count_phase_requests(backend->request_log(), "reanswer.retry") == 4);
  CHECK(load_attempts(path).size() == 7);
  CHECK(validate_run(load_run(paths.root), &exam).ok);
}

TEST_CASE("the published baseline and retry fixture accuracies reproduce through the pipeline") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(1000, "exam/fixture");
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, indices(786), {{AgentKind::retry, 41}});

  Runner runner({tmp.sub("run")}, make_manifest(exam, {AgentKind::retry}), exam, mock_model(),
                backend, default_templates(), fast_options());
  runner.execute();

  CHECK(count_phase_requests(backend->request_log(), "reflect") == 214);

  RunData run = load_run(tmp.sub("run"));
  ScoreSummary baseline = score_baseline(run.baseline);
  CHECK(baseline.accuracy_base == doctest::Approx(0.786).epsilon(1e-12));
  ScoreSummary retry = score(pair_outcomes(run.baseline, run.reanswers[AgentKind::retry]));
  CHECK(retry.accuracy_ref == doctest::Approx(0.827).epsilon(1e-12));
}

TEST_CASE("concurrent workers produce the same artifacts as a sequential run") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(24);
  std::map<AgentKind, std::size_t> reanswer_correct = {{AgentKind::retry, 5},
                                                       {AgentKind::composite, 9}};
  auto run_with = [&](const std::string& dir, int parallelism) {
    auto backend = std::make_shared<ScriptedBackend>();
    testsupport::script_full_run(*backend, kModel, exam, {0, 3, 6, 9, 12, 15, 18, 21},
                                 reanswer_correct);
    RunnerOptions options = fast_options();
    options.parallelism = parallelism;
    options.commit_batch = 4;
    Runner runner({dir}, make_manifest(exam, {AgentKind::retry, AgentKind::composite}), exam,
                  mock_model(), backend, default_templates(), options);
    runner.execute();
  };
  run_with(tmp.sub("seq"), 1);
  run_with(tmp.sub("par"), 4);
  for (const char* name : {"baseline.jsonl", "reflections.jsonl", "reanswer.retry.jsonl",
                           "reanswer.composite.jsonl", "gateway_log.jsonl"}) {
    CHECK_MESSAGE(read_text_file(tmp.sub("seq/") + name) == read_text_file(tmp.sub("par/") + name),
                  name);
  }
}

TEST_CASE("re-answer prompts carry the retry notice for every agent") {
  testsupport::TempDir tmp;
  Exam exam = testsupport::make_exam(2);
  auto backend = std::make_shared<ScriptedBackend>();
  testsupport::script_full_run(*backend, kModel, exam, {0}, {{AgentKind::retry, 0}});

  // Script the re-answer response via a key assertion: the prompt itself is
  // rendered by the pipeline, so check the renderer contract directly on the
  // stored payloads.
  Runner runner({tmp.sub("run")}, make_manifest(exam, {AgentKind::retry}), exam, mock_model(),
                backend, default_templates(), fast_options());
  runner.execute();
  std::vector<ReflectionRecord> records =
      load_reflections(RunPaths{tmp.sub("run")}.reflections_path());
  REQUIRE(records.size() == 1);
  auto messages = render_reanswer_prompt(exam.problems[1], records[0].payloads.at("retry"));
  CHECK(messages[1].content.find("You previously answered this question incorrectly.") !=
        std::string::npos);
}

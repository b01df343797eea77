#include "reflect/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "reflect/analysis.hpp"
#include "reflect/convert.hpp"
#include "reflect/corpus.hpp"
#include "reflect/jsonl.hpp"
#include "reflect/pipeline.hpp"
#include "reflect/util.hpp"

namespace reflect::cli {

namespace {

int config_failure(const std::string& message) {
  std::cerr << "config error: " << message << "\n";
  return kExitConfigError;
}

int run_failure(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return kExitRunError;
}

std::string exam_name_for(const RunConfig& config) {
  if (!config.sample.name.empty()) return config.sample.name;
  return std::filesystem::path(config.exam_path).stem().string();
}

}  // namespace

std::string sanitize_id(const std::string& text) {
  std::string out;
  for (char c : to_lower(text)) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '-');
  }
  return out;
}

std::string run_dir_for(const RunConfig& config, const ModelConfig& model) {
  std::string run_id = config.run_id;
  if (config.models.size() > 1) run_id += "-" + sanitize_id(model.model_id);
  return config.output_dir + "/" + run_id;
}

int cmd_convert(const std::string& input_path, const std::string& format,
                const std::string& source_name, const std::string& topic,
                const std::string& output_path) {
  try {
    ConversionReport report = convert_file(input_path, format, source_name, topic, output_path);
    for (const auto& message : report.messages) std::cerr << message << "\n";
    std::cout << "converted " << report.converted << " problems, skipped " << report.skipped
              << " -> " << output_path << "\n";
    if (report.converted == 0) {
      std::cerr << "warning: no problems converted from " << input_path << "\n";
    }
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    return config_failure(e.what());
  } catch (const std::exception& e) {
    return run_failure(e.what());
  }
}

int cmd_sample(const RunConfig& config) {
  try {
    if (config.problem_sets.empty()) {
      return config_failure("sample needs 'problem_sets' in the config");
    }
    if (config.exam_path.empty()) {
      return config_failure("sample needs 'exam' (output path) in the config");
    }
    std::vector<Exam> parts;
    for (const auto& ref : config.problem_sets) {
      ProblemSet set = load_problem_set(ref.path, ref.name, ref.domain);
      // Per-set seed derived from the run seed and the set name, so adding a
      // set does not reshuffle the others.
      std::uint64_t set_seed = config.seed ^ fnv1a64(set.name);
      parts.push_back(sample_exam(set, config.sample.per_set, set_seed));
    }
    Exam exam = assemble_multi_domain(parts, config.sample.name);
    write_exam(exam, config.exam_path);
    ExamManifest manifest = manifest_for(exam, config.seed);
    std::string manifest_path = config.exam_path + ".manifest.json";
    write_text_file(manifest_path, serialize_exam_manifest(manifest));
    std::cout << "sampled " << exam.problems.size() << " problems into " << config.exam_path
              << "\nmanifest " << manifest_path << " digest "
              << hex64(fnv1a64(serialize_exam_manifest(manifest))) << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    return config_failure(e.what());
  } catch (const CorpusError& e) {
    return run_failure(e.what());
  } catch (const std::exception& e) {
    return run_failure(e.what());
  }
}

int cmd_run(const RunConfig& config) {
  std::shared_ptr<Backend> backend;
  TemplateSet templates;
  Exam exam;
  try {
    if (config.exam_path.empty()) return config_failure("run needs 'exam' in the config");
    if (config.scripted()) {
      backend = ScriptedBackend::from_file(config.transcript_path());
    } else {
      for (const auto& model : config.models) {
        if (model.api_key_env.empty()) {
          return config_failure("model " + model.model_id +
                                " has no 'api_key_env' for the live backend");
        }
        const char* key = std::getenv(model.api_key_env.c_str());
        if (!key || *key == '\0') {
          return config_failure("credential environment variable not set: " +
                                model.api_key_env);
        }
        if (model.endpoint.empty()) {
          return config_failure("model " + model.model_id + " has no 'endpoint'");
        }
      }
      backend = make_http_backend();
    }
    templates =
        config.template_dir.empty() ? default_templates() : load_templates(config.template_dir);
    exam = load_exam(config.exam_path, exam_name_for(config));
  } catch (const ConfigError& e) {
    return config_failure(e.what());
  } catch (const std::exception& e) {
    return config_failure(e.what());
  }

  try {
    for (const auto& model : config.models) {
      RunPaths paths{run_dir_for(config, model)};
      RunManifest manifest;
      bool have_manifest = false;
      if (file_exists(paths.manifest_path())) {
        try {
          manifest = load_manifest(paths.manifest_path());
          have_manifest = true;
        } catch (const std::exception&) {
          // Corrupt manifest: fall through to a fresh one with no phase
          // markers; phases recover from the artifact files themselves.
          std::cerr << "warning: rebuilding corrupt manifest in " << paths.root << "\n";
        }
        if (have_manifest && manifest.config_digest != config.digest()) {
          return config_failure("run directory " + paths.root +
                                " was produced by a different config");
        }
      }
      if (!have_manifest) {
        manifest.run_id = std::filesystem::path(paths.root).filename().string();
        manifest.exam_name = exam.name;
        manifest.exam_path = config.exam_path;
        manifest.model_id = model.model_id;
        manifest.agents = config.agents;
        manifest.seed = config.seed;
        manifest.config_digest = config.digest();
        manifest.tool_version = kToolVersion;
      }

      RunnerOptions options;
      options.parallelism = config.parallelism;
      options.retry.jitter_seed = config.seed;
      options.retry.min_request_interval = std::chrono::milliseconds(config.rate_limit_ms);
      if (config.scripted()) {
        options.sleep = [](std::chrono::milliseconds) {};  // replay never waits
        options.retry.min_request_interval = std::chrono::milliseconds(0);
      }
      Runner runner(paths, manifest, exam, model, backend, templates, options);
      runner.execute();
      std::cout << "run complete: " << paths.root << " (model " << model.model_id << ", "
                << config.agents.size() << " reflecting agents)\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    return run_failure(e.what());
  }
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir,
               bool corrected) {
  try {
    std::vector<RunData> runs;
    for (const auto& dir : run_dirs) {
      RunData run = load_run(dir);
      if (!run.manifest.complete()) {
        return run_failure("run is incomplete: " + dir);
      }
      ValidationReport validation = validate_run(run);
      if (!validation.ok) {
        for (const auto& violation : validation.violations) {
          std::cerr << dir << ": " << violation << "\n";
        }
        return run_failure("run failed structural validation: " + dir);
      }
      runs.push_back(std::move(run));
    }
    write_reports(runs, out_dir, corrected);
    std::cout << read_text_file(out_dir + "/summary.txt");
    std::cout << "reports written to " << out_dir << "\n";
    return kExitOk;
  } catch (const DigestMismatchError& e) {
    return config_failure(e.what());
  } catch (const std::exception& e) {
    return run_failure(e.what());
  }
}

}  // namespace reflect::cli

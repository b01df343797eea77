#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "reflect/cli.hpp"
#include "reflect/convert.hpp"
#include "reflect/util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Self-reflection MCQA experiment harness"};
  app.require_subcommand(1);

  // convert
  std::string convert_input, convert_format, convert_source, convert_topic, convert_output;
  auto* convert = app.add_subcommand(
      "convert", "Convert an upstream benchmark file to the standardized problem schema");
  convert->add_option("--input", convert_input, "Source file (JSON-L)")->required();
  convert->add_option("--format", convert_format,
                      "Source format: " + reflect::join(reflect::known_formats(), ", "))
      ->required();
  convert->add_option("--source", convert_source, "Source identifier to stamp on problems")
      ->required();
  convert->add_option("--topic", convert_topic, "Topic (domain) for the expert persona")
      ->required();
  convert->add_option("--output", convert_output, "Output problem-set file")->required();

  // sample
  std::string sample_config;
  auto* sample = app.add_subcommand(
      "sample", "Sample per-set questions and assemble the multi-domain exam");
  sample->add_option("--config,-c", sample_config, "Run config file")->required();

  // run
  std::string run_config_path, run_id_override, backend_override;
  auto* run = app.add_subcommand("run", "Execute the four batch phases for every model");
  run->add_option("--config,-c", run_config_path, "Run config file")->required();
  run->add_option("--run-id", run_id_override, "Override the config run_id");
  run->add_option("--backend", backend_override,
                  "Override the backend: 'live' or 'scripted:<transcript>'");

  // report
  std::vector<std::string> report_dirs;
  std::string report_out = "report";
  bool uncorrected = false;
  auto* report = app.add_subcommand("report", "Score completed runs and emit tables");
  report->add_option("runs", report_dirs, "Run directories")->required()->expected(-1);
  report->add_option("--out,-o", report_out, "Report output directory");
  report->add_flag("--uncorrected", uncorrected,
                   "Use the uncorrected McNemar statistic instead of the continuity-corrected "
                   "default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : reflect::cli::kExitConfigError;
  }

  if (convert->parsed()) {
    return reflect::cli::cmd_convert(convert_input, convert_format, convert_source,
                                     convert_topic, convert_output);
  }
  if (sample->parsed() || run->parsed()) {
    std::string path = sample->parsed() ? sample_config : run_config_path;
    reflect::RunConfig config;
    try {
      config = reflect::load_run_config(path);
      if (run->parsed()) {
        if (!run_id_override.empty()) config.run_id = run_id_override;
        if (!backend_override.empty()) config.backend = backend_override;
        if (config.backend != "live" && !config.scripted()) {
          throw reflect::ConfigError("backend must be 'live' or 'scripted:<transcript path>'");
        }
      }
    } catch (const reflect::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return reflect::cli::kExitConfigError;
    }
    return sample->parsed() ? reflect::cli::cmd_sample(config) : reflect::cli::cmd_run(config);
  }
  if (report->parsed()) {
    return reflect::cli::cmd_report(report_dirs, report_out, !uncorrected);
  }
  return reflect::cli::kExitConfigError;
}

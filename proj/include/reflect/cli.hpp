#pragma once

#include <string>
#include <vector>

#include "reflect/run_config.hpp"

namespace reflect::cli {

// Exit codes shared by every subcommand.
constexpr int kExitOk = 0;
constexpr int kExitRunError = 1;
constexpr int kExitConfigError = 2;

int cmd_convert(const std::string& input_path, const std::string& format,
                const std::string& source_name, const std::string& topic,
                const std::string& output_path);

/// Samples per-set questions with the config seed, assembles the
/// multi-domain exam, and writes the exam file plus its reconstruction
/// manifest next to it.
int cmd_sample(const RunConfig& config);

/// Runs all four phases for every (model, agent) in the config; resumable
/// and idempotent on completed state.
int cmd_run(const RunConfig& config);

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir,
               bool corrected);

std::string sanitize_id(const std::string& text);

/// Run directory for one model under this config.
std::string run_dir_for(const RunConfig& config, const ModelConfig& model);

}  // namespace reflect::cli

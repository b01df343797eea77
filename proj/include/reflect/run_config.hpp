#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reflect/gateway.hpp"
#include "reflect/reflection.hpp"

namespace reflect {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kToolVersion = "0.1.0";

struct ProblemSetRef {
  std::string path;
  std::string name;
  std::string domain;
};

struct SampleSpec {
  std::size_t per_set = 100;
  std::string name = "multi-domain";
};

/// Declarative run configuration. The experiment constants (temperature 0.0,
/// 100 questions per set, the "[REDACTED]" token) are defaults here;
/// overrides are allowed but end up in the manifest digest.
struct RunConfig {
  std::string run_id = "run";
  std::string exam_path;
  std::vector<ProblemSetRef> problem_sets;
  SampleSpec sample;
  std::vector<ModelConfig> models;
  std::vector<AgentKind> agents;  // reflecting agents; baseline always implicit
  std::uint64_t seed = 0;
  int parallelism = 1;
  int rate_limit_ms = 0;  // minimum spacing between provider calls
  std::string output_dir = "runs";
  std::string template_dir;
  std::string backend = "live";  // "live" or "scripted:<transcript path>"

  bool scripted() const { return backend.rfind("scripted:", 0) == 0; }
  std::string transcript_path() const;

  /// FNV-1a digest of the canonical serialized config; stamped into every
  /// run manifest so reports can refuse to mix incompatible runs.
  std::string digest() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text);

}  // namespace reflect

#include "reflect/run_config.hpp"

#include "json.hpp"
#include "reflect/jsonl.hpp"
#include "reflect/util.hpp"

namespace reflect {

namespace {

using ordered_json = nlohmann::ordered_json;

ModelConfig model_from_json(const ordered_json& obj) {
  ModelConfig model;
  model.model_id = obj.value("model_id", std::string());
  if (model.model_id.empty()) throw ConfigError("model entry missing 'model_id'");
  model.provider = obj.value("provider", std::string("openai"));
  model.endpoint = obj.value("endpoint", std::string());
  model.temperature = obj.value("temperature", 0.0);
  if (model.temperature < 0.0) throw ConfigError("temperature must be >= 0");
  model.max_output_tokens = obj.value("max_output_tokens", 1024);
  model.request_timeout =
      std::chrono::milliseconds(static_cast<long>(obj.value("request_timeout_s", 60.0) * 1000.0));
  model.max_retries = obj.value("max_retries", 3);
  if (model.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  model.api_key_env = obj.value("api_key_env", std::string());
  return model;
}

ordered_json model_to_json(const ModelConfig& model) {
  ordered_json obj;
  obj["model_id"] = model.model_id;
  obj["provider"] = model.provider;
  obj["endpoint"] = model.endpoint;
  obj["temperature"] = model.temperature;
  obj["max_output_tokens"] = model.max_output_tokens;
  obj["request_timeout_s"] = static_cast<double>(model.request_timeout.count()) / 1000.0;
  obj["max_retries"] = model.max_retries;
  obj["api_key_env"] = model.api_key_env;
  return obj;
}

}  // namespace

std::string RunConfig::transcript_path() const {
  if (!scripted()) return "";
  return backend.substr(std::string("scripted:").size());
}

std::string RunConfig::digest() const {
  ordered_json obj;
  obj["run_id"] = run_id;
  obj["exam"] = exam_path;
  ordered_json sets = ordered_json::array();
  for (const auto& set : problem_sets) {
    sets.push_back(ordered_json{{"path", set.path}, {"name", set.name}, {"domain", set.domain}});
  }
  obj["problem_sets"] = sets;
  obj["sample"] = ordered_json{{"per_set", sample.per_set}, {"name", sample.name}};
  ordered_json model_list = ordered_json::array();
  for (const auto& model : models) model_list.push_back(model_to_json(model));
  obj["models"] = model_list;
  ordered_json agent_list = ordered_json::array();
  for (AgentKind agent : agents) agent_list.push_back(to_string(agent));
  obj["agents"] = agent_list;
  obj["seed"] = seed;
  obj["parallelism"] = parallelism;
  obj["rate_limit_ms"] = rate_limit_ms;
  obj["template_dir"] = template_dir;
  obj["backend"] = backend;
  return hex64(fnv1a64(obj.dump()));
}

RunConfig parse_run_config(const std::string& text) {
  ordered_json doc = ordered_json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ConfigError("malformed config JSON");

  RunConfig config;
  config.run_id = doc.value("run_id", std::string("run"));
  config.exam_path = doc.value("exam", std::string());
  if (doc.contains("problem_sets")) {
    for (const auto& entry : doc.at("problem_sets")) {
      ProblemSetRef ref;
      if (entry.is_string()) {
        ref.path = entry.get<std::string>();
      } else {
        ref.path = entry.value("path", std::string());
        ref.name = entry.value("name", std::string());
        ref.domain = entry.value("domain", std::string());
      }
      if (ref.path.empty()) throw ConfigError("problem set entry missing 'path'");
      if (ref.name.empty()) ref.name = ref.path;
      config.problem_sets.push_back(std::move(ref));
    }
  }
  if (doc.contains("sample")) {
    config.sample.per_set = doc.at("sample").value("per_set", std::size_t{100});
    config.sample.name = doc.at("sample").value("name", std::string("multi-domain"));
  }
  if (doc.contains("models")) {
    for (const auto& entry : doc.at("models")) config.models.push_back(model_from_json(entry));
  }
  if (doc.contains("agents")) {
    if (doc.at("agents").is_string() && doc.at("agents").get<std::string>() == "all") {
      config.agents = reflecting_agents();
    } else {
      for (const auto& name : doc.at("agents")) {
        auto agent = agent_from_string(name.get<std::string>());
        if (!agent) {
          throw ConfigError("unknown agent kind '" + name.get<std::string>() + "'");
        }
        if (*agent == AgentKind::baseline) continue;  // always implicit
        config.agents.push_back(*agent);
      }
    }
  }
  config.seed = doc.value("seed", std::uint64_t{0});
  config.parallelism = doc.value("parallelism", 1);
  if (config.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  config.rate_limit_ms = doc.value("rate_limit_ms", 0);
  if (config.rate_limit_ms < 0) throw ConfigError("rate_limit_ms must be >= 0");
  config.output_dir = doc.value("output_dir", std::string("runs"));
  config.template_dir = doc.value("template_dir", std::string());
  config.backend = doc.value("backend", std::string("live"));
  if (config.backend != "live" && !config.scripted()) {
    throw ConfigError("backend must be 'live' or 'scripted:<transcript path>'");
  }

  if (config.models.empty()) throw ConfigError("config needs at least one model");
  // The baseline agent is always implicitly included, so an empty reflecting
  // list is a legal baseline-only run.
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text);
}

}  // namespace reflect

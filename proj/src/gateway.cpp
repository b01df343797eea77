#include "reflect/gateway.hpp"

#include <thread>

#include "json.hpp"
#include "reflect/jsonl.hpp"
#include "reflect/util.hpp"

namespace reflect {

std::string to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string RequestKey::str() const {
  return model_id + "|" + phase + "|" + source + "#" + std::to_string(source_id);
}

std::string to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::content_filter: return "content_filter";
    case ErrorKind::rate_limit: return "rate_limit";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::transport: return "transport";
    case ErrorKind::provider_rejection: return "provider_rejection";
  }
  return "provider_rejection";
}

std::optional<ErrorKind> error_kind_from_string(const std::string& name) {
  if (name == "content_filter") return ErrorKind::content_filter;
  if (name == "rate_limit") return ErrorKind::rate_limit;
  if (name == "timeout") return ErrorKind::timeout;
  if (name == "transport") return ErrorKind::transport;
  if (name == "provider_rejection") return ErrorKind::provider_rejection;
  return std::nullopt;
}

bool is_retryable(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::rate_limit:
    case ErrorKind::timeout:
    case ErrorKind::transport:
      return true;
    case ErrorKind::content_filter:
    case ErrorKind::provider_rejection:
      return false;
  }
  return false;
}

GatewayError GatewayError::make(ErrorKind kind, std::string detail) {
  return GatewayError{kind, std::move(detail), is_retryable(kind)};
}

namespace {

bool looks_like_content_filter(const std::string& body) {
  std::string lowered = to_lower(body);
  return lowered.find("content_filter") != std::string::npos ||
         lowered.find("content filter") != std::string::npos ||
         lowered.find("content_policy") != std::string::npos ||
         lowered.find("safety") != std::string::npos ||
         lowered.find("blocked") != std::string::npos;
}

}  // namespace

GatewayError classify_error(const ProviderResponse& response) {
  if (response.timed_out) {
    return GatewayError::make(ErrorKind::timeout, "request timed out");
  }
  if (response.status == 0) {
    return GatewayError::make(ErrorKind::transport,
                              response.transport_detail.empty() ? "connection failed"
                                                                : response.transport_detail);
  }
  if (response.status == 429) {
    return GatewayError::make(ErrorKind::rate_limit, "HTTP 429");
  }
  if (response.status == 408) {
    return GatewayError::make(ErrorKind::timeout, "HTTP 408");
  }
  if (response.status == 400 && looks_like_content_filter(response.body)) {
    return GatewayError::make(ErrorKind::content_filter, "HTTP 400 safety block");
  }
  if (response.status >= 500) {
    return GatewayError::make(ErrorKind::transport, "HTTP " + std::to_string(response.status));
  }
  return GatewayError::make(ErrorKind::provider_rejection,
                            "HTTP " + std::to_string(response.status));
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt,
                                        std::uint64_t salt) {
  double factor = static_cast<double>(1ULL << std::min(attempt, 20));
  double delay_ms = static_cast<double>(policy.base.count()) * factor;
  // splitmix64-style hash keeps the jitter deterministic per (seed, salt, attempt).
  std::uint64_t h = policy.jitter_seed ^ (salt + 0x9E3779B97F4A7C15ULL +
                                          static_cast<std::uint64_t>(attempt) * 0xBF58476D1CE4E5B9ULL);
  h ^= h >> 30;
  h *= 0xBF58476D1CE4E5B9ULL;
  h ^= h >> 27;
  h *= 0x94D049BB133111EBULL;
  h ^= h >> 31;
  double jitter = 0.5 + 0.5 * (static_cast<double>(h % 1024) / 1024.0);
  double capped = std::min(delay_ms * jitter, static_cast<double>(policy.cap.count()));
  return std::chrono::milliseconds(static_cast<long>(capped));
}

Gateway::Gateway(std::shared_ptr<Backend> backend, RetryPolicy policy, SleepFn sleep)
    : backend_(std::move(backend)), policy_(policy), sleep_(std::move(sleep)) {
  if (!sleep_) {
    sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

void Gateway::throttle() {
  if (policy_.min_request_interval.count() <= 0) return;
  std::chrono::milliseconds wait{0};
  {
    std::lock_guard<std::mutex> lock(throttle_mutex_);
    auto now = std::chrono::steady_clock::now();
    if (next_send_ > now) {
      wait = std::chrono::duration_cast<std::chrono::milliseconds>(next_send_ - now);
    }
    next_send_ = std::max(next_send_, now) + policy_.min_request_interval;
  }
  if (wait.count() > 0) sleep_(wait);
}

GatewayResult Gateway::complete(const ChatRequest& request) {
  if (request.messages.empty()) {
    throw std::invalid_argument("chat request must carry at least one message");
  }
  GatewayResult result{GatewayError::make(ErrorKind::provider_rejection, "not attempted"), {}};
  std::uint64_t salt = fnv1a64(request.key.str());
  int max_retries = std::max(request.config.max_retries, 0);
  for (int attempt = 0;; ++attempt) {
    throttle();
    BackendResult outcome = backend_->attempt(request);
    CallRecord record;
    record.key = request.key;
    record.attempt = attempt;
    if (const auto* completion = std::get_if<Completion>(&outcome)) {
      record.outcome = "ok";
      record.latency_ms = static_cast<long>(completion->latency.count());
      result.calls.push_back(std::move(record));
      result.outcome = std::move(outcome);
      return result;
    }
    const auto& error = std::get<GatewayError>(outcome);
    record.outcome = to_string(error.kind);
    record.detail = error.detail;
    result.calls.push_back(std::move(record));
    if (!error.retryable || attempt >= max_retries) {
      result.outcome = std::move(outcome);
      return result;
    }
    sleep_(backoff_delay(policy_, attempt, salt));
  }
}

void ScriptedBackend::script(const RequestKey& key, std::string text) {
  script(key, std::vector<ScriptedResponse>{ScriptedResponse{std::move(text), std::nullopt, ""}});
}

void ScriptedBackend::script(const RequestKey& key, std::vector<ScriptedResponse> responses) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_[key.str()] = std::move(responses);
}

BackendResult ScriptedBackend::attempt(const ChatRequest& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::string key = request.key.str();
  request_log_.push_back(key);
  auto it = entries_.find(key);
  if (it == entries_.end() || it->second.empty()) {
    throw UnscriptedRequestError("unscripted request: " + key);
  }
  std::size_t index = cursors_[key];
  if (index >= it->second.size()) index = it->second.size() - 1;
  cursors_[key] = index + 1;
  const ScriptedResponse& scripted = it->second[index];
  if (scripted.error) {
    return GatewayError::make(*scripted.error, scripted.detail);
  }
  Completion completion;
  completion.text = scripted.text.value_or("");
  completion.finish_reason = "stop";
  completion.latency = std::chrono::milliseconds(0);
  return completion;
}

std::vector<std::string> ScriptedBackend::request_log() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return request_log_;
}

void ScriptedBackend::clear_request_log() {
  std::lock_guard<std::mutex> lock(mutex_);
  request_log_.clear();
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
  auto backend = std::make_shared<ScriptedBackend>();
  ordered_json doc = ordered_json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("entries")) {
    throw std::runtime_error("malformed transcript file: " + path);
  }
  for (const auto& entry : doc.at("entries")) {
    RequestKey key;
    key.model_id = entry.at("model").get<std::string>();
    key.phase = entry.at("phase").get<std::string>();
    key.source = entry.at("source").get<std::string>();
    key.source_id = entry.at("source_id").get<std::int64_t>();
    std::vector<ScriptedResponse> responses;
    for (const auto& r : entry.at("responses")) {
      ScriptedResponse response;
      if (r.contains("error")) {
        auto kind = error_kind_from_string(r.at("error").get<std::string>());
        if (!kind) {
          throw std::runtime_error("unknown error kind in transcript: " +
                                   r.at("error").get<std::string>());
        }
        response.error = *kind;
        response.detail = r.value("detail", std::string());
      } else {
        response.text = r.at("text").get<std::string>();
      }
      responses.push_back(std::move(response));
    }
    backend->script(key, std::move(responses));
  }
  return backend;
}

}  // namespace reflect

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace reflect {

enum class Role { system, user, assistant };

std::string to_string(Role role);

struct ChatMessage {
  Role role;
  std::string content;
};

struct ModelConfig {
  std::string model_id;
  std::string provider;  // openai | anthropic | google
  std::string endpoint;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  std::chrono::milliseconds request_timeout{60000};
  int max_retries = 3;
  std::string api_key_env;  // environment variable holding the credential
};

/// Identifies a request for scripting and logging: which model asked which
/// question in which phase. Phases are "baseline", "reflect", and
/// "reanswer.<agent>".
struct RequestKey {
  std::string model_id;
  std::string phase;
  std::string source;
  std::int64_t source_id = 0;

  std::string str() const;
};

struct ChatRequest {
  RequestKey key;
  std::vector<ChatMessage> messages;
  ModelConfig config;
};

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct Completion {
  std::string text;
  std::string finish_reason;
  TokenUsage usage;
  std::chrono::milliseconds latency{0};
};

enum class ErrorKind { content_filter, rate_limit, timeout, transport, provider_rejection };

std::string to_string(ErrorKind kind);
std::optional<ErrorKind> error_kind_from_string(const std::string& name);

// Fixed kind -> retryable table; content filters and outright rejections
// are never retried.
bool is_retryable(ErrorKind kind);

struct GatewayError {
  ErrorKind kind = ErrorKind::provider_rejection;
  std::string detail;
  bool retryable = false;

  static GatewayError make(ErrorKind kind, std::string detail);
};

using BackendResult = std::variant<Completion, GatewayError>;

/// Snapshot of a failed provider exchange, normalized across vendors.
/// status 0 means the request never produced an HTTP response.
struct ProviderResponse {
  int status = 0;
  std::string body;
  bool timed_out = false;
  std::string transport_detail;
};

GatewayError classify_error(const ProviderResponse& response);

class Backend {
 public:
  virtual ~Backend() = default;
  // One attempt, no retries; the gateway owns the retry loop.
  virtual BackendResult attempt(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

struct RetryPolicy {
  std::chrono::milliseconds base{1000};
  std::chrono::milliseconds cap{60000};
  std::uint64_t jitter_seed = 0;
  // Minimum spacing between outbound calls (0 = unthrottled); the simple
  // per-provider rate limit used alongside 429 backoff.
  std::chrono::milliseconds min_request_interval{0};
};

/// Exponential backoff with deterministic jitter: base * 2^attempt scaled by
/// a jitter factor in [0.5, 1.0), capped.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt,
                                        std::uint64_t salt);

struct CallRecord {
  RequestKey key;
  int attempt = 0;
  std::string outcome;  // "ok" or an error kind
  long latency_ms = 0;
  std::string detail;
};

struct GatewayResult {
  BackendResult outcome;
  std::vector<CallRecord> calls;
};

/// Wraps a backend with the retry policy. Retryable errors back off
/// exponentially up to config.max_retries; content filters fail immediately.
class Gateway {
 public:
  using SleepFn = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(std::shared_ptr<Backend> backend, RetryPolicy policy = {},
                   SleepFn sleep = nullptr);

  GatewayResult complete(const ChatRequest& request);

  Backend& backend() { return *backend_; }

 private:
  void throttle();

  std::shared_ptr<Backend> backend_;
  RetryPolicy policy_;
  SleepFn sleep_;
  std::mutex throttle_mutex_;
  std::chrono::steady_clock::time_point next_send_{};
};

class UnscriptedRequestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScriptedResponse {
  std::optional<std::string> text;
  std::optional<ErrorKind> error;
  std::string detail;
};

/// Deterministic replay backend keyed by RequestKey. Each key holds a
/// response sequence consumed call by call (the last one repeats), so retry
/// behavior like "rate_limit then success" can be scripted. Every request is
/// recorded for assertions; a missing key fails loudly rather than
/// fabricating output.
class ScriptedBackend : public Backend {
 public:
  void script(const RequestKey& key, std::string text);
  void script(const RequestKey& key, std::vector<ScriptedResponse> responses);

  BackendResult attempt(const ChatRequest& request) override;
  std::string name() const override { return "scripted"; }

  std::vector<std::string> request_log() const;
  void clear_request_log();

  /// Loads a transcript file: {"entries": [{"model", "phase", "source",
  /// "source_id", "responses": [{"text": ...} | {"error": ..., "detail"?}]}]}
  static std::shared_ptr<ScriptedBackend> from_file(const std::string& path);

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<ScriptedResponse>> entries_;
  std::map<std::string, std::size_t> cursors_;
  std::vector<std::string> request_log_;
};

/// Live HTTP backend; translates the role-tagged message list to the
/// provider's wire format (openai, anthropic, or google).
std::shared_ptr<Backend> make_http_backend();

}  // namespace reflect

#include "reflect/gateway.hpp"

#include "doctest.h"
#include "reflect/http_backend.hpp"
#include "reflect/jsonl.hpp"
#include "test_support.hpp"

using namespace reflect;

namespace {

ChatRequest make_request(const std::string& phase = "baseline", std::int64_t id = 1,
                         int max_retries = 3) {
  ChatRequest request;
  request.key = {"mock-model", phase, "set/a", id};
  request.messages = {{Role::system, "You are an expert in Science."}, {Role::user, "Q?"}};
  request.config.model_id = "mock-model";
  request.config.max_retries = max_retries;
  return request;
}

Gateway make_gateway(std::shared_ptr<Backend> backend) {
  return Gateway(std::move(backend), RetryPolicy{}, [](std::chrono::milliseconds) {});
}

}  // namespace

TEST_CASE("scripted backend echoes the scripted text verbatim") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->script({"mock-model", "baseline", "set/a", 1}, "Action: Answer(\"C\")");
  Gateway gateway = make_gateway(backend);
  GatewayResult result = gateway.complete(make_request());
  REQUIRE(std::holds_alternative<Completion>(result.outcome));
  CHECK(std::get<Completion>(result.outcome).text == "Action: Answer(\"C\")");
  CHECK(result.calls.size() == 1);
  CHECK(result.calls[0].outcome == "ok");
}

TEST_CASE("a scripted rate_limit then success costs exactly one retry") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->script({"mock-model", "baseline", "set/a", 1},
                  {{std::nullopt, ErrorKind::rate_limit, "HTTP 429"},
                   {"Action: Answer(\"A\")", std::nullopt, ""}});
  Gateway gateway = make_gateway(backend);
  GatewayResult result = gateway.complete(make_request());
  REQUIRE(std::holds_alternative<Completion>(result.outcome));
  CHECK(std::get<Completion>(result.outcome).text == "Action: Answer(\"A\")");
  REQUIRE(result.calls.size() == 2);
  CHECK(result.calls[0].outcome == "rate_limit");
  CHECK(result.calls[1].outcome == "ok");
}

TEST_CASE("content_filter errors are never retried") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->script({"mock-model", "baseline", "set/a", 1},
                  {{std::nullopt, ErrorKind::content_filter, "safety block"},
                   {"should never be reached", std::nullopt, ""}});
  Gateway gateway = make_gateway(backend);
  GatewayResult result = gateway.complete(make_request());
  REQUIRE(std::holds_alternative<GatewayError>(result.outcome));
  CHECK(std::get<GatewayError>(result.outcome).kind == ErrorKind::content_filter);
  CHECK(result.calls.size() == 1);  // zero retries
}

TEST_CASE("retry count never exceeds max_retries") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->script({"mock-model", "baseline", "set/a", 1},
                  {{std::nullopt, ErrorKind::rate_limit, "HTTP 429"}});
  Gateway gateway = make_gateway(backend);
  GatewayResult result = gateway.complete(make_request("baseline", 1, 2));
  REQUIRE(std::holds_alternative<GatewayError>(result.outcome));
  CHECK(std::get<GatewayError>(result.outcome).kind == ErrorKind::rate_limit);
  CHECK(result.calls.size() == 3);  // initial attempt + 2 retries
}

TEST_CASE("unscripted requests fail loudly") {
  auto backend = std::make_shared<ScriptedBackend>();
  Gateway gateway = make_gateway(backend);
  CHECK_THROWS_AS(gateway.complete(make_request()), UnscriptedRequestError);
}

TEST_CASE("the scripted backend records a deterministic request log") {
  auto run_once = [] {
    auto backend = std::make_shared<ScriptedBackend>();
    for (std::int64_t id = 0; id < 5; ++id) {
      backend->script({"mock-model", "baseline", "set/a", id}, "Action: Answer(\"A\")");
    }
    Gateway gateway = make_gateway(backend);
    for (std::int64_t id = 0; id < 5; ++id) gateway.complete(make_request("baseline", id));
    return backend->request_log();
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("classify_error maps provider responses to the fixed table") {
  GatewayError rate = classify_error({429, "slow down", false, ""});
  CHECK(rate.kind == ErrorKind::rate_limit);
  CHECK(rate.retryable);

  GatewayError filter = classify_error(
      {400, R"({"error": {"code": "content_filter", "message": "blocked"}})", false, ""});
  CHECK(filter.kind == ErrorKind::content_filter);
  CHECK_FALSE(filter.retryable);

  GatewayError timeout = classify_error({0, "", true, "read timed out"});
  CHECK(timeout.kind == ErrorKind::timeout);
  CHECK(timeout.retryable);

  GatewayError transport = classify_error({503, "unavailable", false, ""});
  CHECK(transport.kind == ErrorKind::transport);
  CHECK(transport.retryable);

  GatewayError unknown = classify_error({418, "teapot", false, ""});
  CHECK(unknown.kind == ErrorKind::provider_rejection);
  CHECK_FALSE(unknown.retryable);
}

TEST_CASE("backoff delays grow exponentially under the cap") {
  RetryPolicy policy;
  policy.jitter_seed = 7;
  auto first = backoff_delay(policy, 0, 42);
  auto second = backoff_delay(policy, 1, 42);
  auto huge = backoff_delay(policy, 12, 42);
  CHECK(first.count() >= 500);
  CHECK(first.count() <= 1000);
  CHECK(second.count() >= 1000);
  CHECK(second.count() <= 2000);
  CHECK(huge.count() <= policy.cap.count());
  CHECK(backoff_delay(policy, 3, 42) == backoff_delay(policy, 3, 42));  // deterministic
}

TEST_CASE("the rate limiter spaces back-to-back requests") {
  auto backend = std::make_shared<ScriptedBackend>();
  for (std::int64_t id = 0; id < 3; ++id) {
    backend->script({"mock-model", "baseline", "set/a", id}, "Action: Answer(\"A\")");
  }
  RetryPolicy policy;
  policy.min_request_interval = std::chrono::milliseconds(250);
  std::vector<long> waits;
  Gateway gateway(backend, policy,
                  [&](std::chrono::milliseconds d) { waits.push_back(d.count()); });
  for (std::int64_t id = 0; id < 3; ++id) gateway.complete(make_request("baseline", id));
  // The first call goes straight through; the next two must wait.
  REQUIRE(waits.size() >= 2);
  for (long wait : waits) {
    CHECK(wait > 0);
    CHECK(wait <= 500);
  }

  // Unthrottled gateways never sleep on success.
  waits.clear();
  Gateway free_gateway(backend, RetryPolicy{},
                       [&](std::chrono::milliseconds d) { waits.push_back(d.count()); });
  free_gateway.complete(make_request("baseline", 0));
  CHECK(waits.empty());
}

TEST_CASE("transcript files round-trip through the scripted backend") {
  testsupport::TempDir tmp;
  std::string path = tmp.sub("transcript.json");
  write_text_file(path, R"json({"entries": [
    {"model": "mock-model", "phase": "baseline", "source": "set/a", "source_id": 1,
     "responses": [{"error": "rate_limit"}, {"text": "Action: Answer(\"B\")"}]}
  ]})json");
  auto backend = ScriptedBackend::from_file(path);
  Gateway gateway = make_gateway(backend);
  GatewayResult result = gateway.complete(make_request());
  REQUIRE(std::holds_alternative<Completion>(result.outcome));
  CHECK(std::get<Completion>(result.outcome).text == "Action: Answer(\"B\")");
  CHECK(result.calls.size() == 2);
}

TEST_CASE("wire requests pin the configured temperature") {
  ChatRequest request = make_request();
  request.config.provider = "openai";
  request.config.endpoint = "https://api.openai.com/v1/chat/completions";
  WireRequest wire = build_wire_request(request, "k");
  CHECK(wire.body.at("temperature").get<double>() == 0.0);
  CHECK(wire.body.at("messages").size() == 2);
  CHECK(wire.body.at("messages").at(0).at("role") == "system");

  request.config.temperature = 0.7;  // explicit override travels through
  CHECK(build_wire_request(request, "k").body.at("temperature").get<double>() == 0.7);
}

TEST_CASE("anthropic adapter lifts the system message out of the list") {
  ChatRequest request = make_request();
  request.config.provider = "anthropic";
  request.config.endpoint = "https://api.anthropic.com/v1/messages";
  WireRequest wire = build_wire_request(request, "k");
  CHECK(wire.body.at("system") == "You are an expert in Science.");
  CHECK(wire.body.at("messages").size() == 1);
  CHECK(wire.body.at("messages").at(0).at("role") == "user");
  bool has_key_header = false;
  for (const auto& [name, value] : wire.headers) {
    if (name == "x-api-key" && value == "k") has_key_header = true;
  }
  CHECK(has_key_header);
}

TEST_CASE("google adapter builds contents and keys the URL") {
  ChatRequest request = make_request();
  request.config.provider = "google";
  request.config.endpoint = "https://host/v1beta/models/gemini:generateContent";
  WireRequest wire = build_wire_request(request, "secret");
  CHECK(wire.url.find("key=secret") != std::string::npos);
  CHECK(wire.body.at("contents").size() == 1);
  CHECK(wire.body.contains("systemInstruction"));
}

TEST_CASE("provider replies parse into completions or classified errors") {
  BackendResult ok = parse_wire_response(
      "openai",
      {200, R"({"choices": [{"message": {"content": "hi"}, "finish_reason": "stop"}], "usage": {"prompt_tokens": 3, "completion_tokens": 1}})",
       false, ""});
  REQUIRE(std::holds_alternative<Completion>(ok));
  CHECK(std::get<Completion>(ok).text == "hi");
  CHECK(std::get<Completion>(ok).usage.prompt_tokens == 3);

  BackendResult filtered = parse_wire_response(
      "openai", {200, R"({"choices": [{"message": {}, "finish_reason": "content_filter"}]})",
                 false, ""});
  REQUIRE(std::holds_alternative<GatewayError>(filtered));
  CHECK(std::get<GatewayError>(filtered).kind == ErrorKind::content_filter);

  BackendResult anthropic = parse_wire_response(
      "anthropic",
      {200, R"({"content": [{"type": "text", "text": "claude says"}], "stop_reason": "end_turn"})",
       false, ""});
  REQUIRE(std::holds_alternative<Completion>(anthropic));
  CHECK(std::get<Completion>(anthropic).text == "claude says");

  BackendResult google = parse_wire_response(
      "google",
      {200, R"({"candidates": [{"content": {"parts": [{"text": "gemini says"}]}, "finishReason": "STOP"}]})",
       false, ""});
  REQUIRE(std::holds_alternative<Completion>(google));
  CHECK(std::get<Completion>(google).text == "gemini says");

  BackendResult blocked = parse_wire_response(
      "google", {200, R"({"promptFeedback": {"blockReason": "SAFETY"}})", false, ""});
  REQUIRE(std::holds_alternative<GatewayError>(blocked));
  CHECK(std::get<GatewayError>(blocked).kind == ErrorKind::content_filter);
}

TEST_CASE("parse_url splits scheme, host, port, and path") {
  UrlParts parts = parse_url("https://api.openai.com/v1/chat/completions");
  CHECK(parts.https);
  CHECK(parts.host == "api.openai.com");
  CHECK(parts.port == 0);
  CHECK(parts.path == "/v1/chat/completions");

  parts = parse_url("http://localhost:8089/v1");
  CHECK_FALSE(parts.https);
  CHECK(parts.port == 8089);
  CHECK_THROWS_AS(parse_url("ftp://nope"), std::invalid_argument);
}

#include "reflect/http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <stdexcept>

#include "httplib.h"
#include "reflect/util.hpp"

namespace reflect {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json messages_to_openai(const std::vector<ChatMessage>& messages) {
  ordered_json list = ordered_json::array();
  for (const auto& message : messages) {
    ordered_json m;
    m["role"] = to_string(message.role);
    m["content"] = message.content;
    list.push_back(m);
  }
  return list;
}

WireRequest build_openai(const ChatRequest& request, const std::string& api_key) {
  WireRequest wire;
  wire.url = request.config.endpoint;
  wire.headers = {{"Authorization", "Bearer " + api_key},
                  {"api-key", api_key}};  // Azure-hosted deployments read this one
  wire.body["model"] = request.config.model_id;
  wire.body["messages"] = messages_to_openai(request.messages);
  wire.body["temperature"] = request.config.temperature;
  wire.body["max_tokens"] = request.config.max_output_tokens;
  return wire;
}

WireRequest build_anthropic(const ChatRequest& request, const std::string& api_key) {
  WireRequest wire;
  wire.url = request.config.endpoint;
  wire.headers = {{"x-api-key", api_key}, {"anthropic-version", "2023-06-01"}};
  wire.body["model"] = request.config.model_id;
  wire.body["max_tokens"] = request.config.max_output_tokens;
  wire.body["temperature"] = request.config.temperature;
  ordered_json messages = ordered_json::array();
  for (const auto& message : request.messages) {
    if (message.role == Role::system) {
      wire.body["system"] = message.content;
      continue;
    }
    ordered_json m;
    m["role"] = to_string(message.role);
    m["content"] = message.content;
    messages.push_back(m);
  }
  wire.body["messages"] = messages;
  return wire;
}

WireRequest build_google(const ChatRequest& request, const std::string& api_key) {
  WireRequest wire;
  wire.url = request.config.endpoint;
  if (wire.url.find('?') == std::string::npos) {
    wire.url += "?key=" + api_key;
  }
  ordered_json contents = ordered_json::array();
  for (const auto& message : request.messages) {
    if (message.role == Role::system) {
      ordered_json part;
      part["parts"] = ordered_json::array({ordered_json{{"text", message.content}}});
      wire.body["systemInstruction"] = part;
      continue;
    }
    ordered_json m;
    m["role"] = message.role == Role::assistant ? "model" : "user";
    m["parts"] = ordered_json::array({ordered_json{{"text", message.content}}});
    contents.push_back(m);
  }
  wire.body["contents"] = contents;
  wire.body["generationConfig"] = ordered_json{
      {"temperature", request.config.temperature},
      {"maxOutputTokens", request.config.max_output_tokens}};
  return wire;
}

Completion completion_from(std::string text, std::string finish_reason, long prompt_tokens,
                           long completion_tokens) {
  Completion completion;
  completion.text = std::move(text);
  completion.finish_reason = std::move(finish_reason);
  completion.usage.prompt_tokens = prompt_tokens;
  completion.usage.completion_tokens = completion_tokens;
  return completion;
}

BackendResult parse_openai(const ProviderResponse& response) {
  ordered_json doc = ordered_json::parse(response.body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("choices") || doc.at("choices").empty()) {
    return GatewayError::make(ErrorKind::provider_rejection, "unparseable provider reply");
  }
  const auto& choice = doc.at("choices").at(0);
  std::string finish = choice.value("finish_reason", std::string("stop"));
  if (finish == "content_filter") {
    return GatewayError::make(ErrorKind::content_filter, "completion truncated by content filter");
  }
  std::string text;
  if (choice.contains("message") && choice.at("message").contains("content") &&
      choice.at("message").at("content").is_string()) {
    text = choice.at("message").at("content").get<std::string>();
  }
  long prompt_tokens = 0;
  long completion_tokens = 0;
  if (doc.contains("usage")) {
    prompt_tokens = doc.at("usage").value("prompt_tokens", 0L);
    completion_tokens = doc.at("usage").value("completion_tokens", 0L);
  }
  return completion_from(std::move(text), std::move(finish), prompt_tokens, completion_tokens);
}

BackendResult parse_anthropic(const ProviderResponse& response) {
  ordered_json doc = ordered_json::parse(response.body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("content")) {
    return GatewayError::make(ErrorKind::provider_rejection, "unparseable provider reply");
  }
  std::string text;
  for (const auto& block : doc.at("content")) {
    if (block.value("type", std::string()) == "text") {
      text += block.value("text", std::string());
    }
  }
  std::string finish = doc.value("stop_reason", std::string("end_turn"));
  long prompt_tokens = 0;
  long completion_tokens = 0;
  if (doc.contains("usage")) {
    prompt_tokens = doc.at("usage").value("input_tokens", 0L);
    completion_tokens = doc.at("usage").value("output_tokens", 0L);
  }
  return completion_from(std::move(text), std::move(finish), prompt_tokens, completion_tokens);
}

BackendResult parse_google(const ProviderResponse& response) {
  ordered_json doc = ordered_json::parse(response.body, nullptr, false);
  if (doc.is_discarded()) {
    return GatewayError::make(ErrorKind::provider_rejection, "unparseable provider reply");
  }
  if (doc.contains("promptFeedback") && doc.at("promptFeedback").contains("blockReason")) {
    return GatewayError::make(ErrorKind::content_filter,
                              doc.at("promptFeedback").value("blockReason", std::string()));
  }
  if (!doc.contains("candidates") || doc.at("candidates").empty()) {
    return GatewayError::make(ErrorKind::provider_rejection, "no candidates in reply");
  }
  const auto& candidate = doc.at("candidates").at(0);
  std::string finish = candidate.value("finishReason", std::string("STOP"));
  if (finish == "SAFETY") {
    return GatewayError::make(ErrorKind::content_filter, "candidate blocked for safety");
  }
  std::string text;
  if (candidate.contains("content") && candidate.at("content").contains("parts")) {
    for (const auto& part : candidate.at("content").at("parts")) {
      text += part.value("text", std::string());
    }
  }
  return completion_from(std::move(text), std::move(finish), 0, 0);
}

class HttpBackend : public Backend {
 public:
  BackendResult attempt(const ChatRequest& request) override {
    std::string provider = to_lower(request.config.provider);
    const char* key = nullptr;
    if (!request.config.api_key_env.empty()) {
      key = std::getenv(request.config.api_key_env.c_str());
    }
    if (!key || *key == '\0') {
      return GatewayError::make(ErrorKind::provider_rejection,
                                "credential not set: " + request.config.api_key_env);
    }
    WireRequest wire = build_wire_request(request, key);
    UrlParts url = parse_url(wire.url);

    auto started = std::chrono::steady_clock::now();
    ProviderResponse raw = post(url, wire, request.config.request_timeout);
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    if (raw.timed_out || raw.status == 0 || raw.status < 200 || raw.status >= 300) {
      return classify_error(raw);
    }
    BackendResult parsed = parse_wire_response(provider, raw);
    if (auto* completion = std::get_if<Completion>(&parsed)) {
      completion->latency = elapsed;
    }
    return parsed;
  }

  std::string name() const override { return "http"; }

 private:
  static ProviderResponse post(const UrlParts& url, const WireRequest& wire,
                               std::chrono::milliseconds timeout) {
    ProviderResponse raw;
    std::string origin = (url.https ? "https://" : "http://") + url.host;
    if (url.port != 0) origin += ":" + std::to_string(url.port);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url.https) {
      raw.transport_detail = "built without TLS support; use an http endpoint or rebuild";
      return raw;
    }
#endif
    httplib::Client client(origin);
    auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    client.set_connection_timeout(seconds.count(), 0);
    client.set_read_timeout(seconds.count(), 0);
    client.set_write_timeout(seconds.count(), 0);
    httplib::Headers headers;
    for (const auto& [name, value] : wire.headers) headers.emplace(name, value);
    auto result = client.Post(url.path, headers, wire.body.dump(), "application/json");
    if (!result) {
      if (result.error() == httplib::Error::ConnectionTimeout ||
          result.error() == httplib::Error::Read || result.error() == httplib::Error::Write) {
        raw.timed_out = result.error() == httplib::Error::ConnectionTimeout;
      }
      raw.transport_detail = httplib::to_string(result.error());
      return raw;
    }
    raw.status = result->status;
    raw.body = result->body;
    return raw;
  }
};

}  // namespace

WireRequest build_wire_request(const ChatRequest& request, const std::string& api_key) {
  std::string provider = to_lower(request.config.provider);
  if (provider == "anthropic") return build_anthropic(request, api_key);
  if (provider == "google") return build_google(request, api_key);
  return build_openai(request, api_key);
}

BackendResult parse_wire_response(const std::string& provider, const ProviderResponse& response) {
  std::string p = to_lower(provider);
  if (p == "anthropic") return parse_anthropic(response);
  if (p == "google") return parse_google(response);
  return parse_openai(response);
}

UrlParts parse_url(const std::string& url) {
  UrlParts parts;
  std::string rest = url;
  if (rest.rfind("https://", 0) == 0) {
    parts.https = true;
    rest = rest.substr(8);
  } else if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  } else {
    throw std::invalid_argument("endpoint must be an http(s) URL: " + url);
  }
  std::size_t slash = rest.find('/');
  std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
  parts.path = slash == std::string::npos ? "/" : rest.substr(slash);
  std::size_t colon = authority.find(':');
  if (colon == std::string::npos) {
    parts.host = authority;
  } else {
    parts.host = authority.substr(0, colon);
    parts.port = std::stoi(authority.substr(colon + 1));
  }
  if (parts.host.empty()) throw std::invalid_argument("endpoint has no host: " + url);
  return parts;
}

std::shared_ptr<Backend> make_http_backend() { return std::make_shared<HttpBackend>(); }

}  // namespace reflect

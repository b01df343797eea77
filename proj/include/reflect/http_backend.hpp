#pragma once

#include <string>

#include "json.hpp"
#include "reflect/gateway.hpp"

namespace reflect {

// Wire-format translation is split out from the transport so it can be
// checked without a network.

struct WireRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  nlohmann::ordered_json body;
};

/// Builds the provider-specific JSON body and auth headers for a request.
/// Providers: "openai" (and any compatible chat-completions endpoint),
/// "anthropic", "google".
WireRequest build_wire_request(const ChatRequest& request, const std::string& api_key);

/// Maps a raw provider reply onto a Completion or a classified error.
BackendResult parse_wire_response(const std::string& provider, const ProviderResponse& response);

struct UrlParts {
  bool https = false;
  std::string host;
  int port = 0;
  std::string path;
};

UrlParts parse_url(const std::string& url);

}  // namespace reflect

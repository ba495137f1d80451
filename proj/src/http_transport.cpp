// Copyright 2026 The Translit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Eigen (via the client header) must precede httplib, whose <resolv.h>
// defines a `_res` macro that collides with Eigen parameter names.
#include "translit/llm_client.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>

namespace translit {

namespace {

/// Splits "https://host[:port]/path" into the origin and the path.
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw PreconditionError("endpoint needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

HttpTransport::HttpTransport(const LlmConfig& config) : config_(config) {
  config_.validate();
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthError("API key variable " + config_.api_key_env + " is not set");
  }
  api_key_ = key;
}

TransportReply HttpTransport::send(const nlohmann::json& request, const LlmItem&) {
  const auto [origin, path] = split_endpoint(config_.endpoint);
  httplib::Client client(origin);
  client.set_bearer_token_auth(api_key_);
  const auto timeout = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count();
  client.set_connection_timeout(static_cast<time_t>(timeout));
  client.set_read_timeout(static_cast<time_t>(timeout));

  TransportReply reply;
  const auto start = std::chrono::steady_clock::now();
  const auto res = client.Post(path, request.dump(), "application/json");
  reply.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!res) {
    reply.status = TransportReply::Status::kRetryable;
    reply.error = "transport error: " + httplib::to_string(res.error());
    return reply;
  }
  if (res->status == 401 || res->status == 403) {
    reply.status = TransportReply::Status::kAuth;
    reply.error = "authentication rejected (HTTP " + std::to_string(res->status) + ")";
    return reply;
  }
  if (res->status == 408 || res->status == 429 || res->status >= 500) {
    reply.status = TransportReply::Status::kRetryable;
    reply.error = "HTTP " + std::to_string(res->status);
    return reply;
  }
  if (res->status != 200) {
    reply.status = TransportReply::Status::kFailed;
    reply.error = "HTTP " + std::to_string(res->status);
    return reply;
  }
  try {
    const auto body = nlohmann::json::parse(res->body);
    reply.content = body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    reply.status = TransportReply::Status::kFailed;
    reply.error = std::string("unparseable response: ") + e.what();
  }
  return reply;
}

}  // namespace translit

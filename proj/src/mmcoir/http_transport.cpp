// Copyright 2026 The mmcoir Authors
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
#include "mmcoir/http_transport.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "mmcoir/error.hpp"

namespace mmcoir {

Endpoint parse_endpoint(std::string_view url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    raise(ErrorCode::kConfigError, "endpoint must start with http://: " + std::string(url));
  }
  const std::string_view scheme = url.substr(0, scheme_end);
  if (scheme != "http") raise(ErrorCode::kConfigError, "unsupported endpoint scheme: " + std::string(scheme));
  const std::size_t path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  if (path_start == std::string_view::npos) {
    ep.scheme_host_port = std::string(url);
    ep.path = "/";
  } else {
    ep.scheme_host_port = std::string(url.substr(0, path_start));
    ep.path = std::string(url.substr(path_start));
  }
  if (ep.scheme_host_port.size() <= scheme_end + 3) {
    raise(ErrorCode::kConfigError, "endpoint has no host: " + std::string(url));
  }
  return ep;
}

std::string post_json(const std::string& url, const std::string& body, const RetryPolicy& policy) {
  const Endpoint ep = parse_endpoint(url);
  httplib::Client client(ep.scheme_host_port);
  const auto timeout = std::chrono::milliseconds(policy.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  std::string last_error;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(policy.backoff_ms) << (attempt - 1)));
    }
    auto res = client.Post(ep.path, body, "application/json");
    if (!res) {
      last_error = "request to " + url + " failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server " + url + " answered HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400) {
      raise(ErrorCode::kProtocolError, "server " + url + " rejected request with HTTP " +
                                           std::to_string(res->status) + ": " + res->body);
    }
    return res->body;
  }
  raise(ErrorCode::kTransportError,
        last_error + " (after " + std::to_string(policy.max_retries + 1) + " attempts)");
}

}  // namespace mmcoir

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
#pragma once

#include <string>
#include <string_view>

namespace mmcoir {

struct Endpoint {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string path;              // e.g. "/v1/embed"
};

/// Splits "http://host:port/path". Throws Error(kConfigError).
Endpoint parse_endpoint(std::string_view url);

struct RetryPolicy {
  int max_retries = 3;
  int backoff_ms = 50;
  int timeout_ms = 30000;
};

/// POSTs a JSON body and returns the response body. Connection failures and
/// 5xx responses are retried with exponential backoff
/// (backoff_ms * 2^attempt) and surface as Error(kTransportError) once
/// retries run out; 4xx responses raise Error(kProtocolError) immediately.
std::string post_json(const std::string& url, const std::string& body, const RetryPolicy& policy);

}  // namespace mmcoir

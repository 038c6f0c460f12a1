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

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "mmcoir/embedder.hpp"
#include "mmcoir/projection_head.hpp"
#include "mmcoir/vector_index.hpp"

namespace httplib {
class Server;
}

namespace mmcoir {

/// Immutable after construction; shared by all request threads.
struct ServiceState {
  std::map<std::string, VectorIndex> corpora;
  std::shared_ptr<EmbeddingBackend> backend;
  std::optional<ProjectionHead> head;
  std::size_t token_budget = 256;
};

struct SearchRequest {
  std::string instruction;
  std::optional<std::string> text;
  std::optional<std::string> code;
  /// Decoded image content.
  std::optional<std::string> image_bytes;
  std::string corpus;
  std::size_t k = 10;
};

/// Parses a /v1/search body. Throws Error(kInvalidArgument) whose message
/// starts with the offending field name.
SearchRequest parse_search_request(std::string_view body);

struct HttpReply {
  int status = 200;
  std::string body;
};

/// {"hits":[{"id","score","payload_ref":{"dataset_tag","row","modalities"}}]}
std::string search_response_json(const RetrievalResult& result, const VectorIndex& index);

class RetrievalService {
 public:
  explicit RetrievalService(std::shared_ptr<const ServiceState> state);
  ~RetrievalService();
  RetrievalService(const RetrievalService&) = delete;
  RetrievalService& operator=(const RetrievalService&) = delete;

  /// Library-level search used by the HTTP handler. Throws Error(kNotFound)
  /// for an unknown corpus.
  RetrievalResult search(const SearchRequest& req) const;

  HttpReply handle_search(std::string_view body) const;
  HttpReply handle_health() const;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  void install_routes();

  std::shared_ptr<const ServiceState> state_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace mmcoir

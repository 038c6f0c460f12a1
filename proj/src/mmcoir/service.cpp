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


#include "mmcoir/service.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "mmcoir/corpus.hpp"
#include "mmcoir/error.hpp"
#include "mmcoir/io_util.hpp"

namespace mmcoir {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void bad_field(const std::string& field, const std::string& what) {
  raise(ErrorCode::kInvalidArgument, field + ": " + what);
}

std::string error_body(ErrorCode code, const std::string& message) {
  ojson j;
  j["error"]["code"] = std::string(error_name(code));
  j["error"]["message"] = message;
  return j.dump();
}

}  // namespace

SearchRequest parse_search_request(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception&) {
    bad_field("body", "not valid JSON");
  }
  if (!doc.is_object()) bad_field("body", "must be a JSON object");
  static const char* kKnown[] = {"instruction", "text", "image_b64", "code", "corpus", "k"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool known = false;
    for (const char* k : kKnown) known = known || it.key() == k;
    if (!known) bad_field(it.key(), "unknown field");
  }
  auto opt_string = [&](const char* key) -> std::optional<std::string> {
    if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
    if (!doc[key].is_string()) bad_field(key, "must be a string");
    return doc[key].get<std::string>();
  };
  SearchRequest r;
  auto inst = opt_string("instruction");
  if (!inst || inst->empty()) bad_field("instruction", "required non-empty string");
  r.instruction = *inst;
  auto corpus = opt_string("corpus");
  if (!corpus || corpus->empty()) bad_field("corpus", "required non-empty string");
  r.corpus = *corpus;
  r.text = opt_string("text");
  r.code = opt_string("code");
  if (auto b64 = opt_string("image_b64")) {
    try {
      r.image_bytes = base64_decode(*b64);
    } catch (const Error&) {
      bad_field("image_b64", "not valid base64");
    }
    if (r.image_bytes->empty()) bad_field("image_b64", "decodes to an empty image");
  }
  if (!r.text && !r.code && !r.image_bytes) bad_field("text", "one of text, code, image_b64 is required");
  if (doc.contains("k") && !doc["k"].is_null()) {
    if (!doc["k"].is_number_integer() || doc["k"].get<long long>() < 1) bad_field("k", "must be a positive integer");
    r.k = doc["k"].get<std::size_t>();
  }
  return r;
}

std::string search_response_json(const RetrievalResult& result, const VectorIndex& index) {
  ojson out;
  out["hits"] = ojson::array();
  for (const Hit& h : result.hits) {
    const PayloadRef& p = index.payload(index.position(h.id));
    ojson hit;
    hit["id"] = h.id;
    hit["score"] = h.score;
    hit["payload_ref"] = {{"dataset_tag", p.dataset_tag}, {"row", p.row}, {"modalities", p.modalities.letters()}};
    out["hits"].push_back(std::move(hit));
  }
  return out.dump();
}

RetrievalService::RetrievalService(std::shared_ptr<const ServiceState> state) : state_(std::move(state)) {
  if (!state_ || !state_->backend) raise(ErrorCode::kInvalidArgument, "service needs a backend");
  const std::string expected =
      state_->backend->id() + (state_->head ? "+head:" + state_->head->fingerprint() : std::string());
  for (const auto& [tag, index] : state_->corpora) {
    if (index.backend_id() != expected) {
      raise(ErrorCode::kConfigError, "corpus '" + tag + "' was built with '" + index.backend_id() +
                                         "' but queries use '" + expected + "'");
    }
  }
}

RetrievalService::~RetrievalService() { stop(); }

RetrievalResult RetrievalService::search(const SearchRequest& req) const {
  auto it = state_->corpora.find(req.corpus);
  if (it == state_->corpora.end()) raise(ErrorCode::kNotFound, "unknown corpus '" + req.corpus + "'");
  ModalItem item;
  item.text = req.text;
  item.code = req.code;
  if (req.image_bytes) {
    item.image_ref = "request-image";
    item.image_bytes = std::make_shared<const std::string>(*req.image_bytes);
  }
  const Instruction inst{"request", req.instruction};
  const SerializedItem s = compose_query(item, inst, state_->token_budget);
  auto vecs = state_->backend->embed(std::span<const SerializedItem>(&s, 1));
  if (state_->head) vecs = state_->head->project_all(Side::kQuery, vecs);
  RetrievalResult r = it->second.search_topk(vecs.front().values, req.k);
  r.query_id = req.corpus;
  return r;
}

HttpReply RetrievalService::handle_search(std::string_view body) const {
  try {
    const SearchRequest req = parse_search_request(body);
    const RetrievalResult res = search(req);
    return {200, search_response_json(res, state_->corpora.at(req.corpus))};
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kNotFound:
        return {404, error_body(e.code(), e.what())};
      case ErrorCode::kTransportError:
      case ErrorCode::kProtocolError:
        return {503, error_body(e.code(), e.what())};
      case ErrorCode::kInvalidArgument:
      case ErrorCode::kEmptyItem:
      case ErrorCode::kImageReadError:
      case ErrorCode::kDimMismatch:
        return {400, error_body(e.code(), e.what())};
      default:
        return {500, error_body(e.code(), e.what())};
    }
  }
}

HttpReply RetrievalService::handle_health() const {
  ojson out;
  out["status"] = "ok";
  out["corpora"] = ojson::array();
  std::size_t dim = 0;
  for (const auto& [tag, index] : state_->corpora) {
    out["corpora"].push_back(tag);
    dim = index.dim();
  }
  out["dim"] = dim;
  return {200, out.dump()};
}

void RetrievalService::install_routes() {
  server_ = std::make_unique<httplib::Server>();
  server_->Post("/v1/search", [this](const httplib::Request& req, httplib::Response& res) {
    const HttpReply r = handle_search(req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  server_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    const HttpReply r = handle_health();
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
}

int RetrievalService::start(const std::string& host, int port) {
  stop();
  install_routes();
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) raise(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void RetrievalService::listen(const std::string& host, int port) {
  stop();
  install_routes();
  if (!server_->listen(host, port)) raise(ErrorCode::kIoError, "cannot listen on " + host + ":" + std::to_string(port));
}

void RetrievalService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace mmcoir

// Copyright 2026 The sda2e Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SDA2E_SERVICE_HPP_
#define SDA2E_SERVICE_HPP_

#include <cstddef>
#include <map>
#include <memory>
#include <string>

#include "sda2e/settings.hpp"

namespace sda2e {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;   // served at /, optional
  std::string journal_dir;  // one <session>.jsonl per session, optional
  std::size_t max_upload_mb = 64;
  std::size_t top_features = 10;
  std::size_t neighbors = 3;
};

// Raised by request handlers; rendered as {code, message, detail}.
struct ApiError {
  int status = 400;
  std::string code;
  std::string message;
  Json detail;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Transport-independent request handling. Each session owns a worker
// thread for training steps; reads come from the last published snapshot.
//
//   POST /datasets                    {name, data, labels?, missing_as_normal?}
//   GET  /datasets
//   POST /sessions                    {dataset, session?, model?}
//   GET  /sessions
//   GET  /sessions/{id}
//   GET  /sessions/{id}/candidates
//   POST /sessions/{id}/labels        {labels: {id: label}} or [{id, label}]
//   GET  /sessions/{id}/metrics
//   GET  /sessions/{id}/ranking?offset&limit
//   GET  /sessions/{id}/report
//   GET  /healthz
class ServiceCore {
 public:
  explicit ServiceCore(ServiceOptions options);
  ~ServiceCore();
  ServiceCore(const ServiceCore&) = delete;
  ServiceCore& operator=(const ServiceCore&) = delete;

  ApiResponse handle(const std::string& method, const std::string& path,
                     const std::map<std::string, std::string>& query,
                     const std::string& body);

  // Blocks until the session's queued work is done. For tests and tools.
  void wait_idle(const std::string& session_id);

  const ServiceOptions& options() const { return options_; }

 private:
  struct Impl;
  ServiceOptions options_;
  std::unique_ptr<Impl> impl_;
};

// HTTP front end over ServiceCore.
class Server {
 public:
  explicit Server(ServiceOptions options);
  ~Server();

  ServiceCore& core();
  // Binds; port 0 picks a free one. Returns the bound port.
  int bind();
  // Serves until stop(). bind() must have been called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// bind() + listen() on options.host:options.port.
void serve(const ServiceOptions& options);

}  // namespace sda2e

#endif  // SDA2E_SERVICE_HPP_

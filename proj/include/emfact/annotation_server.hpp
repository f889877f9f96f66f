/*
 * Copyright 2026 The emfact Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "emfact/annotation.hpp"

namespace httplib {
class Server;
}

namespace emfact {

// JSON API over an AnnotationStore:
//   GET  /api/health
//   GET  /api/tasks/next?annotator=ID
//   POST /api/submissions
//   GET  /api/export?kind=empathy|fact_review
// Every /api route except health needs "Authorization: Bearer <token>" whose
// annotator matches the one named in the request.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Binds to an ephemeral port; returns it, or -1 on failure.
  int bind_any(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  // Blocks until stop().
  bool serve();
  void stop();
  void wait_until_ready() const;

 private:
  void routes();

  AnnotationStore& store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace emfact

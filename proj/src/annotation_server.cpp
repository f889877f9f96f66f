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

#include "emfact/annotation_server.hpp"

#include <httplib.h>

namespace emfact {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationStore& store, std::optional<std::filesystem::path> static_dir)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  if (static_dir && !server_->set_mount_point("/", static_dir->string()))
    throw ConfigError("static asset directory not found: " + static_dir->string());
  routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind_any(const std::string& host) { return server_->bind_to_any_port(host); }
bool AnnotationServer::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }
bool AnnotationServer::serve() { return server_->listen_after_bind(); }
void AnnotationServer::stop() {
  if (server_->is_running()) server_->stop();
}
void AnnotationServer::wait_until_ready() const { server_->wait_until_ready(); }

void AnnotationServer::routes() {
  auto& s = *server_;

  // Resolves the bearer token; writes a 401 and returns nullopt when it fails.
  auto auth = [this](const httplib::Request& req, httplib::Response& res) -> std::optional<std::string> {
    auto header = req.get_header_value("Authorization");
    const std::string prefix = "Bearer ";
    if (header.rfind(prefix, 0) != 0) {
      send_error(res, 401, "missing bearer token");
      return std::nullopt;
    }
    auto who = store_.authenticate(header.substr(prefix.size()));
    if (!who) send_error(res, 401, "invalid token");
    return who;
  };

  s.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"tasks", store_.tasks().size()}, {"submissions", store_.submission_count()}});
  });

  s.Get("/api/tasks/next", [this, auth](const httplib::Request& req, httplib::Response& res) {
    auto who = auth(req, res);
    if (!who) return;
    if (!req.has_param("annotator")) return send_error(res, 400, "missing annotator parameter");
    auto annotator = req.get_param_value("annotator");
    if (annotator != *who) return send_error(res, 403, "token does not belong to annotator " + annotator);
    try {
      auto task = store_.next_task(annotator);
      if (!task) return send_json(res, 200, {{"done", true}});
      send_json(res, 200, public_payload(*task, "open"));
    } catch (const AnnotationError& e) {
      send_error(res, e.http_status(), e.what());
    }
  });

  s.Post("/api/submissions", [this, auth](const httplib::Request& req, httplib::Response& res) {
    auto who = auth(req, res);
    if (!who) return;
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return send_error(res, 400, "request body is not valid JSON");
    }
    try {
      auto sub = submission_from_json(body);
      if (sub.annotator_id != *who) return send_error(res, 403, "token does not belong to annotator " + sub.annotator_id);
      auto outcome = store_.submit(sub);
      send_json(res, outcome == SubmitOutcome::accepted ? 201 : 200,
                {{"task_id", sub.task_id}, {"status", outcome == SubmitOutcome::accepted ? "accepted" : "duplicate"}});
    } catch (const AnnotationError& e) {
      send_error(res, e.http_status(), e.what());
    } catch (const Error& e) {
      send_error(res, 500, e.what());
    }
  });

  s.Get("/api/export", [this, auth](const httplib::Request& req, httplib::Response& res) {
    if (!auth(req, res)) return;
    TaskKind kind;
    try {
      kind = parse_task_kind(req.get_param_value("kind"));
    } catch (const ConfigError& e) {
      return send_error(res, 400, e.what());
    }
    json files = json::object();
    for (const auto& [name, records] : store_.export_records(kind)) files[name] = records;
    send_json(res, 200, {{"kind", to_string(kind)}, {"files", files}});
  });
}

}  // namespace emfact

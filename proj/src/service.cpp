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

#include "sda2e/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "sda2e/active.hpp"
#include "sda2e/data.hpp"
#include "sda2e/error.hpp"
#include "sda2e/eval.hpp"
#include "sda2e/report.hpp"
#include "sda2e/similarity.hpp"

namespace sda2e {
namespace {

constexpr std::size_t kMaxPageSize = 1000;
constexpr std::size_t kDefaultPageSize = 50;

[[noreturn]] void fail(int status, std::string code, std::string message,
                       Json detail = nullptr) {
  throw ApiError{status, std::move(code), std::move(message),
                 std::move(detail)};
}

ApiResponse json_response(int status, const Json& body) {
  return {status, body.dump(), "application/json"};
}

ApiResponse error_response(const ApiError& e) {
  Json body = Json::object();
  body["code"] = e.code;
  body["message"] = e.message;
  body["detail"] = e.detail;
  return json_response(e.status, body);
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  return parts;
}

Json parse_body(const std::string& body) {
  try {
    Json j = Json::parse(body);
    if (!j.is_object()) fail(400, "invalid_json", "body must be a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    fail(400, "invalid_json", "request body is not valid JSON",
         Json{{"parser", e.what()}});
  }
}

std::size_t query_count(const std::map<std::string, std::string>& query,
                        const std::string& key, std::size_t fallback) {
  auto it = query.find(key);
  if (it == query.end() || it->second.empty()) return fallback;
  try {
    return parse_count(key, it->second);
  } catch (const ConfigError& e) {
    fail(400, "invalid_query", e.what(), Json{{"parameter", key}});
  }
}

struct DatasetEntry {
  std::string id;
  std::string name;
  BinaryDataset data{1};
  std::optional<LabelMap> labels;

  Json describe() const {
    Json j = Json::object();
    j["id"] = id;
    j["name"] = name;
    j["rows"] = data.size();
    j["features"] = data.width();
    j["labeled"] = labels.has_value();
    j["anomalies"] = labels ? Json(labels->anomaly_count()) : Json(nullptr);
    j["checksum"] = hex64(data.checksum());
    return j;
  }
};

// Everything a read needs, built under the session's writer lock.
struct Snapshot {
  std::string phase;
  Json state;
  Json candidates;
  Json metrics;
  std::vector<std::size_t> ranking;
  std::vector<double> scores;
  std::vector<std::int8_t> answers;  // -1 unlabeled
  std::string report;                // empty without ground truth
};

struct SessionEntry {
  std::string id;
  std::shared_ptr<const DatasetEntry> dataset;
  std::unique_ptr<ActiveSession> session;

  std::mutex writer;  // serializes every mutation of `session`
  bool busy = false;  // a start/advance is queued or running
  std::string failure;
  std::ofstream journal_file;
  std::string journal;

  std::mutex snap_mu;
  std::shared_ptr<const Snapshot> snap;

  std::mutex queue_mu;
  std::condition_variable queue_cv;
  std::condition_variable idle_cv;
  std::deque<std::function<void()>> tasks;
  bool running = false;
  bool stopping = false;
  std::thread worker;

  ~SessionEntry() {
    if (worker.joinable() &&
        worker.get_id() == std::this_thread::get_id()) {
      worker.detach();
      return;
    }
    shutdown();
  }

  std::shared_ptr<const Snapshot> snapshot() {
    std::lock_guard lock(snap_mu);
    return snap;
  }
  void publish(std::shared_ptr<const Snapshot> s) {
    std::lock_guard lock(snap_mu);
    snap = std::move(s);
  }

  void enqueue(std::function<void()> task) {
    {
      std::lock_guard lock(queue_mu);
      tasks.push_back(std::move(task));
    }
    queue_cv.notify_one();
  }

  void run_worker() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(queue_mu);
        queue_cv.wait(lock, [&] { return stopping || !tasks.empty(); });
        if (tasks.empty()) return;
        task = std::move(tasks.front());
        tasks.pop_front();
        running = true;
      }
      task();
      {
        std::lock_guard lock(queue_mu);
        running = false;
      }
      idle_cv.notify_all();
    }
  }

  void wait_idle() {
    std::unique_lock lock(queue_mu);
    idle_cv.wait(lock, [&] { return tasks.empty() && !running; });
  }

  void shutdown() {
    {
      std::lock_guard lock(queue_mu);
      stopping = true;
    }
    queue_cv.notify_all();
    if (worker.joinable()) worker.join();
  }
};

Json label_json(std::int8_t a) {
  if (a < 0) return nullptr;
  return std::string(label_name(a == 0 ? Label::kNormal : Label::kAnomaly));
}

}  // namespace

struct ServiceCore::Impl {
  ServiceOptions options;
  std::mutex registry_mu;
  std::map<std::string, std::shared_ptr<const DatasetEntry>> datasets;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions;
  std::vector<std::string> dataset_order, session_order;
  std::size_t next_dataset = 1, next_session = 1;

  ~Impl() {
    for (auto& [id, s] : sessions) s->shutdown();
  }

  std::shared_ptr<SessionEntry> find_session(const std::string& id) {
    std::lock_guard lock(registry_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) {
      fail(404, "unknown_session", "no session '" + id + "'",
           Json{{"session", id}});
    }
    return it->second;
  }

  // Caller holds e.writer.
  std::shared_ptr<const Snapshot> build_snapshot(SessionEntry& e) const {
    auto snap = std::make_shared<Snapshot>();
    const ActiveSession& s = *e.session;
    const BinaryDataset& data = e.dataset->data;
    if (!e.failure.empty()) {
      snap->phase = "failed";
    } else if (e.busy) {
      snap->phase = s.phase() == Phase::kCreated ? "training" : "retraining";
    } else {
      snap->phase = std::string(phase_name(s.phase()));
    }
    const bool awaiting = snap->phase == "awaiting_labels";
    const std::vector<std::size_t> pending =
        awaiting ? s.pending() : std::vector<std::size_t>{};

    snap->scores = s.scores();
    snap->ranking = s.ranking();
    snap->answers.assign(data.size(), -1);
    for (std::size_t r : s.sets().normals()) snap->answers[r] = 0;
    for (std::size_t r : s.sets().anomalies()) snap->answers[r] = 1;

    Json state = Json::object();
    state["id"] = e.id;
    state["dataset"] = Json{{"id", e.dataset->id}, {"name", e.dataset->name}};
    state["phase"] = snap->phase;
    state["iteration"] = s.iteration();
    state["iterations"] = s.config().iterations;
    state["budget"] = s.config().budget;
    state["oracle_calls"] = s.oracle_calls();
    Json ids = Json::array();
    for (std::size_t r : pending) ids.push_back(data.id(r));
    state["pending"] = ids;
    state["labeled"] = Json{{"normal", s.sets().normals().size()},
                            {"anomaly", s.sets().anomalies().size()},
                            {"pool", s.sets().pool_size()},
                            {"unlabeled", s.sets().unlabeled_count()}};
    state["session"] = session_config_json(s.config());
    state["model"] = model_config_json(s.model_config());
    state["error"] = e.failure.empty() ? Json(nullptr) : Json(e.failure);
    snap->state = std::move(state);

    std::vector<std::size_t> rank(data.size(), 0);
    for (std::size_t i = 0; i < snap->ranking.size(); ++i) {
      rank[snap->ranking[i]] = i + 1;
    }
    Json cands = Json::array();
    for (std::size_t r : pending) {
      Json c = Json::object();
      c["id"] = data.id(r);
      c["score"] = snap->scores[r];
      c["rank"] = rank[r];
      const std::vector<double> x = data.row(r).to_dense();
      const std::vector<double> mask = s.model().attention_mask(x);
      std::vector<std::size_t> active;
      for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] != 0.0) active.push_back(j);
      }
      std::stable_sort(active.begin(), active.end(),
                       [&](std::size_t a, std::size_t b) {
                         return mask[a] > mask[b];
                       });
      if (active.size() > options.top_features) {
        active.resize(options.top_features);
      }
      Json feats = Json::array();
      for (std::size_t j : active) {
        feats.push_back(Json{{"name", data.feature_names()[j]},
                             {"index", j},
                             {"weight", mask[j]}});
      }
      c["features"] = feats;
      auto near = [&](const std::vector<std::size_t>& pool) {
        Json out = Json::array();
        for (const auto& h : topk_similar(data.row(r), data.rows(), pool,
                                          s.config().metric,
                                          options.neighbors)) {
          out.push_back(Json{{"id", data.id(h.index)},
                             {"similarity", h.score}});
        }
        return out;
      };
      c["neighbors"] = Json{{"anomaly", near(s.sets().anomalies())},
                            {"normal", near(s.sets().normals())}};
      cands.push_back(std::move(c));
    }
    const double tau = s.records().empty() ? 0.0 : s.records().back().tau;
    snap->candidates = Json{{"iteration", s.iteration()},
                            {"tau", tau},
                            {"candidates", cands}};

    Json series = Json::array();
    std::vector<double> values;
    for (const auto& r : s.records()) {
      Json p = Json::object();
      p["iteration"] = r.iteration;
      p["ndcg"] = r.ndcg ? Json(*r.ndcg) : Json(nullptr);
      p["tau"] = r.tau;
      p["queried"] = r.queried.size();
      p["expanded"] = r.expanded.size();
      p["priority"] = r.priority.size();
      p["pool_size"] = r.pool_size;
      p["retrained"] = r.retrained;
      series.push_back(std::move(p));
      if (r.ndcg) values.push_back(*r.ndcg);
    }
    Json summary = nullptr;
    if (!values.empty()) {
      const auto t = summarize({values});
      summary = Json{{"max_max", t.max_max},
                     {"max_mean", t.max_mean},
                     {"max_median", t.max_median}};
    }
    snap->metrics = Json{{"phase", snap->phase},
                         {"iteration", s.iteration()},
                         {"series", series},
                         {"summary", summary}};

    if (s.truth() != nullptr && !s.records().empty()) {
      std::ostringstream text;
      write_report(session_report(s, std::string(strategy_name(
                                         s.config().strategy)),
                                  e.dataset->name),
                   text);
      snap->report = text.str();
    }
    return snap;
  }

  // Runs `step` on the worker, then republishes.
  void schedule(const std::shared_ptr<SessionEntry>& e,
                std::function<void(ActiveSession&)> step) {
    e->busy = true;
    e->publish(build_snapshot(*e));
    std::weak_ptr<SessionEntry> weak = e;
    e->enqueue([this, weak, step = std::move(step)] {
      auto self = weak.lock();
      if (!self) return;
      std::lock_guard lock(self->writer);
      try {
        step(*self->session);
      } catch (const std::exception& ex) {
        self->failure = ex.what();
      }
      self->busy = false;
      self->publish(build_snapshot(*self));
    });
  }

  ApiResponse post_dataset(const std::string& body) {
    const std::size_t cap = options.max_upload_mb * 1024 * 1024;
    if (body.size() > cap) {
      fail(413, "payload_too_large", "upload exceeds the size limit",
           Json{{"limit_bytes", cap}});
    }
    const Json req = parse_body(body);
    if (!req.contains("data") || !req["data"].is_string()) {
      fail(400, "invalid_request", "'data' must hold the dataset CSV text");
    }
    auto entry = std::make_shared<DatasetEntry>();
    entry->name = req.value("name", std::string("dataset.csv"));
    std::istringstream data_in(req["data"].get<std::string>());
    entry->data = parse_dataset_csv(data_in, entry->name);
    if (req.contains("labels") && !req["labels"].is_null()) {
      if (!req["labels"].is_string()) {
        fail(400, "invalid_request", "'labels' must hold the label CSV text");
      }
      std::istringstream label_in(req["labels"].get<std::string>());
      entry->labels = parse_labels_csv(label_in, entry->data,
                                       req.value("missing_as_normal", false),
                                       "labels");
    }
    std::lock_guard lock(registry_mu);
    entry->id = "d" + std::to_string(next_dataset++);
    datasets[entry->id] = entry;
    dataset_order.push_back(entry->id);
    return json_response(201, entry->describe());
  }

  ApiResponse list_datasets() {
    std::lock_guard lock(registry_mu);
    Json out = Json::array();
    for (const auto& id : dataset_order) out.push_back(datasets[id]->describe());
    return json_response(200, Json{{"datasets", out}});
  }

  ApiResponse post_session(const std::string& body) {
    const Json req = parse_body(body);
    if (!req.contains("dataset") || !req["dataset"].is_string()) {
      fail(400, "invalid_request", "'dataset' must name an uploaded dataset");
    }
    std::shared_ptr<const DatasetEntry> ds;
    {
      std::lock_guard lock(registry_mu);
      auto it = datasets.find(req["dataset"].get<std::string>());
      if (it == datasets.end()) {
        fail(404, "unknown_dataset",
             "no dataset '" + req["dataset"].get<std::string>() + "'",
             Json{{"dataset", req["dataset"]}});
      }
      ds = it->second;
    }
    SessionConfig sc;
    Sda2eConfig mc;
    mc.d = ds->data.width();
    if (req.contains("session")) sc = session_config_from_json(req["session"]);
    if (req.contains("model")) mc = model_config_from_json(req["model"], mc);
    sc.validate();
    mc = mc.resolved();
    mc.validate();

    auto e = std::make_shared<SessionEntry>();
    e->dataset = ds;
    e->session = std::make_unique<ActiveSession>(
        ds->data, ds->labels ? &*ds->labels : nullptr, sc, mc);
    {
      std::lock_guard lock(registry_mu);
      e->id = "s" + std::to_string(next_session++);
    }
    if (!options.journal_dir.empty()) {
      std::filesystem::create_directories(options.journal_dir);
      const auto path =
          std::filesystem::path(options.journal_dir) / (e->id + ".jsonl");
      e->journal_file.open(path, std::ios::binary | std::ios::trunc);
      if (!e->journal_file) {
        fail(500, "journal_unavailable", "cannot open " + path.string());
      }
    }
    SessionEntry* raw = e.get();
    e->session->set_journal([raw](std::string_view line) {
      raw->journal.append(line);
      raw->journal += '\n';
      if (raw->journal_file.is_open()) {
        raw->journal_file << line << '\n';
        raw->journal_file.flush();
      }
    });
    e->worker = std::thread([raw] { raw->run_worker(); });
    {
      std::lock_guard lock(e->writer);
      schedule(e, [](ActiveSession& s) { s.start(); });
    }
    {
      std::lock_guard lock(registry_mu);
      sessions[e->id] = e;
      session_order.push_back(e->id);
    }
    return json_response(201, e->snapshot()->state);
  }

  ApiResponse list_sessions() {
    std::vector<std::shared_ptr<SessionEntry>> all;
    {
      std::lock_guard lock(registry_mu);
      for (const auto& id : session_order) all.push_back(sessions[id]);
    }
    Json out = Json::array();
    for (const auto& e : all) {
      const auto snap = e->snapshot();
      out.push_back(Json{{"id", e->id},
                         {"dataset", e->dataset->id},
                         {"phase", snap->phase},
                         {"iteration", snap->state["iteration"]}});
    }
    return json_response(200, Json{{"sessions", out}});
  }

  ApiResponse post_labels(const std::shared_ptr<SessionEntry>& e,
                          const std::string& body) {
    const Json req = parse_body(body);
    if (!req.contains("labels")) {
      fail(400, "invalid_request", "'labels' is required");
    }
    const BinaryDataset& data = e->dataset->data;
    std::vector<std::pair<std::string, std::string>> items;
    const Json& labels = req["labels"];
    if (labels.is_object()) {
      for (auto it = labels.begin(); it != labels.end(); ++it) {
        if (!it.value().is_string()) {
          fail(400, "invalid_label", "label values must be strings",
               Json{{"id", it.key()}});
        }
        items.emplace_back(it.key(), it.value().get<std::string>());
      }
    } else if (labels.is_array()) {
      for (const auto& item : labels) {
        if (!item.is_object() || !item.contains("id") ||
            !item["id"].is_string() || !item.contains("label") ||
            !item["label"].is_string()) {
          fail(400, "invalid_request",
               "label entries must be {\"id\": string, \"label\": string}");
        }
        items.emplace_back(item["id"].get<std::string>(),
                           item["label"].get<std::string>());
      }
    } else {
      fail(400, "invalid_request", "'labels' must be an object or array");
    }
    if (items.empty()) fail(400, "invalid_request", "no labels given");

    std::lock_guard lock(e->writer);
    ActiveSession& s = *e->session;
    if (e->busy || !e->failure.empty() ||
        s.phase() != Phase::kAwaitingLabels) {
      fail(409, "wrong_phase", "session is not awaiting labels",
           Json{{"phase", e->snapshot()->phase}});
    }
    const std::vector<std::size_t> pending = s.pending();
    std::vector<std::pair<std::size_t, Label>> parsed;
    for (const auto& [id, text] : items) {
      const auto row = data.find(id);
      if (!row) {
        fail(400, "unknown_id", "no row '" + id + "' in the dataset",
             Json{{"id", id}});
      }
      for (const auto& p : parsed) {
        if (p.first == *row) {
          fail(400, "duplicate_id", "row '" + id + "' appears twice",
               Json{{"id", id}});
        }
      }
      if (s.sets().is_labeled(*row)) {
        fail(409, "already_labeled", "row '" + id + "' is already labeled",
             Json{{"id", id},
                  {"label", std::string(label_name(*s.sets().answer(*row)))}});
      }
      if (std::find(pending.begin(), pending.end(), *row) == pending.end()) {
        fail(400, "not_pending", "row '" + id + "' was not queried",
             Json{{"id", id}});
      }
      Label label;
      try {
        label = parse_label(text);
      } catch (const std::exception&) {
        fail(400, "invalid_label", "label must be 'normal' or 'anomaly'",
             Json{{"id", id}, {"label", text}});
      }
      parsed.emplace_back(*row, label);
    }
    for (const auto& [row, label] : parsed) s.submit(row, label);
    if (s.ready()) {
      schedule(e, [](ActiveSession& session) { session.advance(); });
    } else {
      e->publish(build_snapshot(*e));
    }
    const auto snap = e->snapshot();
    return json_response(200, Json{{"accepted", parsed.size()},
                                   {"phase", snap->phase},
                                   {"pending", snap->state["pending"]}});
  }

  ApiResponse get_ranking(const std::shared_ptr<SessionEntry>& e,
                          const std::map<std::string, std::string>& query) {
    const auto snap = e->snapshot();
    const std::size_t offset = query_count(query, "offset", 0);
    const std::size_t limit =
        std::min(query_count(query, "limit", kDefaultPageSize), kMaxPageSize);
    const BinaryDataset& data = e->dataset->data;
    Json rows = Json::array();
    for (std::size_t i = offset;
         i < snap->ranking.size() && i < offset + limit; ++i) {
      const std::size_t r = snap->ranking[i];
      rows.push_back(Json{{"rank", i + 1},
                          {"id", data.id(r)},
                          {"score", snap->scores[r]},
                          {"label", label_json(snap->answers[r])}});
    }
    return json_response(200, Json{{"total", snap->ranking.size()},
                                   {"offset", offset},
                                   {"limit", limit},
                                   {"rows", rows}});
  }

  ApiResponse route(const std::string& method, const std::string& path,
                    const std::map<std::string, std::string>& query,
                    const std::string& body) {
    const auto parts = split_path(path);
    auto not_found = [&]() -> ApiResponse {
      fail(404, "not_found", "no route for " + method + " " + path);
    };
    auto wrong_method = [&]() -> ApiResponse {
      fail(405, "method_not_allowed", method + " is not allowed on " + path);
    };
    if (parts.empty()) {
      if (method != "GET") return wrong_method();
      return {200,
              "<!doctype html><title>sda2e</title><p>sda2e service is "
              "running. No UI assets were configured.</p>\n",
              "text/html"};
    }
    if (parts.size() == 1 && parts[0] == "healthz") {
      if (method != "GET") return wrong_method();
      return json_response(200, Json{{"status", "ok"}});
    }
    if (parts[0] == "datasets" && parts.size() == 1) {
      if (method == "POST") return post_dataset(body);
      if (method == "GET") return list_datasets();
      return wrong_method();
    }
    if (parts[0] != "sessions") return not_found();
    if (parts.size() == 1) {
      if (method == "POST") return post_session(body);
      if (method == "GET") return list_sessions();
      return wrong_method();
    }
    auto e = find_session(parts[1]);
    if (parts.size() == 2) {
      if (method != "GET") return wrong_method();
      return json_response(200, e->snapshot()->state);
    }
    if (parts.size() != 3) return not_found();
    const std::string& leaf = parts[2];
    if (leaf == "labels") {
      if (method != "POST") return wrong_method();
      return post_labels(e, body);
    }
    if (method != "GET") return wrong_method();
    const auto snap = e->snapshot();
    if (leaf == "candidates") {
      if (snap->phase != "awaiting_labels") {
        fail(409, "wrong_phase", "no candidates outside awaiting_labels",
             Json{{"phase", snap->phase}});
      }
      return json_response(200, snap->candidates);
    }
    if (leaf == "metrics") {
      Json m = snap->metrics;
      m["ranking"] = Json::parse(get_ranking(e, {{"limit", "20"}}).body);
      return json_response(200, m);
    }
    if (leaf == "ranking") return get_ranking(e, query);
    if (leaf == "report") {
      if (snap->report.empty()) {
        fail(409, "no_report",
             "reports need ground-truth labels and a finished iteration",
             Json{{"phase", snap->phase}});
      }
      return {200, snap->report, "text/plain"};
    }
    return not_found();
  }
};

ServiceCore::ServiceCore(ServiceOptions options)
    : options_(options), impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
}

ServiceCore::~ServiceCore() = default;

ApiResponse ServiceCore::handle(const std::string& method,
                                const std::string& path,
                                const std::map<std::string, std::string>& query,
                                const std::string& body) {
  try {
    return impl_->route(method, path, query, body);
  } catch (const ApiError& e) {
    return error_response(e);
  } catch (const ConfigError& e) {
    return error_response({400, "invalid_config", e.what(), nullptr});
  } catch (const DataError& e) {
    return error_response({400, "invalid_data", e.what(), nullptr});
  } catch (const UndefinedMetricError& e) {
    return error_response({422, "undefined_metric", e.what(), nullptr});
  } catch (const PhaseError& e) {
    return error_response({409, "wrong_phase", e.what(), nullptr});
  } catch (const std::exception& e) {
    return error_response({500, "internal", e.what(), nullptr});
  }
}

void ServiceCore::wait_idle(const std::string& session_id) {
  std::shared_ptr<SessionEntry> e;
  {
    std::lock_guard lock(impl_->registry_mu);
    auto it = impl_->sessions.find(session_id);
    if (it == impl_->sessions.end()) return;
    e = it->second;
  }
  e->wait_idle();
}

struct Server::Impl {
  explicit Impl(ServiceOptions o) : core(o), options(std::move(o)) {}
  ServiceCore core;
  ServiceOptions options;
  httplib::Server http;
  int port = -1;
};

Server::Server(ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {
  auto& http = impl_->http;
  // The core enforces the exact limit with a JSON error.
  http.set_payload_max_length(impl_->options.max_upload_mb * 1024 * 1024 +
                              (1u << 20));
  if (!impl_->options.static_dir.empty()) {
    if (!http.set_mount_point("/", impl_->options.static_dir)) {
      throw ConfigError("static directory not found: " +
                        impl_->options.static_dir);
    }
  }
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const ApiResponse r =
        impl_->core.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  http.Get(".*", forward);
  http.Post(".*", forward);
  http.Put(".*", forward);
  http.Delete(".*", forward);
  http.Patch(".*", forward);
}

Server::~Server() { stop(); }

ServiceCore& Server::core() { return impl_->core; }

int Server::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(o.host);
  } else if (impl_->http.bind_to_port(o.host, o.port)) {
    impl_->port = o.port;
  }
  if (impl_->port < 0) {
    throw std::runtime_error("cannot bind " + o.host + ":" +
                             std::to_string(o.port));
  }
  return impl_->port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_->http.is_running()) impl_->http.stop();
}

void serve(const ServiceOptions& options) {
  Server server(options);
  server.bind();
  server.listen();
}

}  // namespace sda2e

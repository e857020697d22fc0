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

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>
#include <httplib.h>

#include "cli.hpp"
#include "sda2e/data.hpp"
#include "sda2e/report.hpp"
#include "sda2e/scoring.hpp"

namespace sda2e {
namespace {

namespace fs = std::filesystem;

SyntheticData small_data() {
  SyntheticSpec spec;
  spec.n = 100;
  spec.d = 16;
  spec.anomaly_fraction = 0.05;
  spec.normal_clusters = 3;
  spec.seed = 5;
  return generate_synthetic(spec);
}

std::string csv(const BinaryDataset& d) {
  std::ostringstream o;
  write_dataset_csv(d, o);
  return o.str();
}

std::string labels_csv(const SyntheticData& s) {
  std::ostringstream o;
  write_labels_csv(s.dataset, s.labels, o);
  return o.str();
}

class ServiceTest : public ::testing::Test {
 protected:
  ServiceTest() : core_(ServiceOptions{}), syn_(small_data()) {}

  Json call(const std::string& method, const std::string& path,
            const Json& body = nullptr, int expect = 200,
            std::map<std::string, std::string> query = {}) {
    const auto r = core_.handle(method, path, query,
                                body.is_null() ? "" : body.dump());
    EXPECT_EQ(r.status, expect) << method << ' ' << path << ": " << r.body;
    if (r.content_type != "application/json") return Json(r.body);
    return Json::parse(r.body);
  }

  std::string upload(bool with_labels = true) {
    Json body{{"name", "dataset.csv"}, {"data", csv(syn_.dataset)}};
    if (with_labels) body["labels"] = labels_csv(syn_);
    return call("POST", "/datasets", body, 201)["id"];
  }

  std::string create(const std::string& ds, Json session = Json::object()) {
    if (!session.contains("budget")) session["budget"] = 4;
    if (!session.contains("iterations")) session["iterations"] = 3;
    const Json body{{"dataset", ds},
                    {"session", session},
                    {"model", {{"epochs", 2}, {"batch_size", 16}}}};
    const std::string id = call("POST", "/sessions", body, 201)["id"];
    core_.wait_idle(id);
    return id;
  }

  // Answers every pending candidate from the ground truth.
  void label_all(const std::string& sid) {
    for (;;) {
      core_.wait_idle(sid);
      const auto st = call("GET", "/sessions/" + sid);
      if (st["phase"] != "awaiting_labels") return;
      Json labels = Json::object();
      for (const auto& id : st["pending"]) {
        const auto row = *syn_.dataset.find(id.get<std::string>());
        labels[id.get<std::string>()] = std::string(label_name(syn_.labels.at(row)));
      }
      call("POST", "/sessions/" + sid + "/labels", Json{{"labels", labels}});
    }
  }

  ServiceCore core_;
  SyntheticData syn_;
};

TEST_F(ServiceTest, HealthAndIndex) {
  EXPECT_EQ(call("GET", "/healthz")["status"], "ok");
  const auto r = core_.handle("GET", "/", {}, "");
  EXPECT_EQ(r.content_type, "text/html");
  EXPECT_EQ(call("GET", "/nowhere", nullptr, 404)["code"], "not_found");
  EXPECT_EQ(call("DELETE", "/healthz", nullptr, 405)["code"],
            "method_not_allowed");
}

TEST_F(ServiceTest, DatasetUploadAndList) {
  const auto id = upload();
  const auto list = call("GET", "/datasets")["datasets"];
  ASSERT_EQ(list.size(), 1u);
  EXPECT_EQ(list[0]["id"], id);
  EXPECT_EQ(list[0]["rows"], 100);
  EXPECT_EQ(list[0]["features"], 16);
  EXPECT_EQ(list[0]["anomalies"], 5);
  EXPECT_EQ(list[0]["labeled"], true);
  EXPECT_EQ(list[0]["checksum"], hex64(syn_.dataset.checksum()));
}

TEST_F(ServiceTest, UploadErrors) {
  EXPECT_EQ(call("POST", "/datasets", Json{{"name", "x"}}, 400)["code"],
            "invalid_request");
  const auto bad = call("POST", "/datasets",
                        Json{{"data", "id,a\nr1,7\n"}}, 400);
  EXPECT_EQ(bad["code"], "invalid_data");
  EXPECT_NE(bad["message"].get<std::string>().find(":2:2"), std::string::npos);
  const auto r = core_.handle("POST", "/datasets", {}, "{not json");
  EXPECT_EQ(r.status, 400);

  ServiceOptions tiny;
  tiny.max_upload_mb = 0;
  ServiceCore capped(tiny);
  const auto big = capped.handle(
      "POST", "/datasets", {}, Json{{"data", csv(syn_.dataset)}}.dump());
  EXPECT_EQ(big.status, 413);
  EXPECT_EQ(Json::parse(big.body)["code"], "payload_too_large");
}

TEST_F(ServiceTest, SessionCreationErrors) {
  const auto ds = upload();
  EXPECT_EQ(call("POST", "/sessions", Json{{"dataset", "d99"}}, 404)["code"],
            "unknown_dataset");
  EXPECT_EQ(call("POST", "/sessions",
                 Json{{"dataset", ds}, {"session", {{"budget", 0}}}}, 400)["code"],
            "invalid_config");
  EXPECT_EQ(call("POST", "/sessions",
                 Json{{"dataset", ds}, {"model", {{"k", 99}}}}, 400)["code"],
            "invalid_config");
  EXPECT_EQ(call("GET", "/sessions/s42", nullptr, 404)["code"],
            "unknown_session");

  const std::string unlabeled = call(
      "POST", "/datasets", Json{{"data", csv(syn_.dataset)},
                                {"labels", "id,label\n"},
                                {"missing_as_normal", true}},
      201)["id"];
  EXPECT_EQ(call("POST", "/sessions", Json{{"dataset", unlabeled}}, 422)["code"],
            "undefined_metric");
}

TEST_F(ServiceTest, CandidatesCarryScoresFeaturesAndNeighbors) {
  const auto sid = create(upload());
  const auto st = call("GET", "/sessions/" + sid);
  ASSERT_EQ(st["phase"], "awaiting_labels");
  EXPECT_EQ(st["iteration"], 0);
  const auto c = call("GET", "/sessions/" + sid + "/candidates");
  const auto& list = c["candidates"];
  ASSERT_FALSE(list.empty());
  ASSERT_LE(list.size(), 4u);
  EXPECT_EQ(list.size(), st["pending"].size());

  // Rebuild the model from the session's own cold start to cross-check
  // scores through the public ranking endpoint.
  const auto ranking =
      call("GET", "/sessions/" + sid + "/ranking", nullptr, 200,
           {{"limit", "1000"}});
  std::map<std::string, double> score;
  for (const auto& row : ranking["rows"]) score[row["id"]] = row["score"];
  EXPECT_EQ(ranking["total"], 100);
  double last = 1e300;
  for (const auto& cand : list) {
    EXPECT_EQ(cand["score"].get<double>(), score[cand["id"]]);
    EXPECT_LE(cand["score"].get<double>(), last);
    last = cand["score"];
    const auto row = *syn_.dataset.find(cand["id"].get<std::string>());
    const auto& feats = cand["features"];
    EXPECT_LE(feats.size(), 10u);
    double prev = 2.0;
    for (const auto& f : feats) {
      EXPECT_TRUE(syn_.dataset.row(row).test(f["index"].get<std::size_t>()));
      EXPECT_EQ(f["name"], syn_.dataset.feature_names()[f["index"]]);
      EXPECT_LE(f["weight"].get<double>(), prev);
      prev = f["weight"];
    }
    EXPECT_TRUE(cand["neighbors"]["anomaly"].empty());
    EXPECT_TRUE(cand["neighbors"]["normal"].empty());
  }
  EXPECT_GT(c["tau"].get<double>(), 0.0);
}

TEST_F(ServiceTest, LabelValidation) {
  const auto sid = create(upload());
  const auto pending = call("GET", "/sessions/" + sid)["pending"];
  ASSERT_GE(pending.size(), 2u);
  const std::string a = pending[0], b = pending[1];
  const std::string path = "/sessions/" + sid + "/labels";

  EXPECT_EQ(call("POST", path, Json{{"labels", {{"nope", "normal"}}}}, 400)["code"],
            "unknown_id");
  EXPECT_EQ(call("POST", path, Json{{"labels", {{a, "weird"}}}}, 400)["code"],
            "invalid_label");
  std::string other;
  for (const auto& id : syn_.dataset.ids()) {
    if (std::find(pending.begin(), pending.end(), id) == pending.end()) {
      other = id;
      break;
    }
  }
  EXPECT_EQ(call("POST", path, Json{{"labels", {{other, "normal"}}}}, 400)["code"],
            "not_pending");
  EXPECT_EQ(call("POST", path,
                 Json{{"labels", Json::array({{{"id", a}, {"label", "normal"}},
                                              {{"id", a}, {"label", "normal"}}})}},
                 400)["code"],
            "duplicate_id");
  // A rejected batch applies nothing.
  EXPECT_EQ(call("POST", path,
                 Json{{"labels", {{a, "normal"}, {"zzz", "normal"}}}}, 400)["code"],
            "unknown_id");
  EXPECT_EQ(call("GET", "/sessions/" + sid)["oracle_calls"], 0);

  const auto ok = call("POST", path, Json{{"labels", {{a, "normal"}}}});
  EXPECT_EQ(ok["accepted"], 1);
  EXPECT_EQ(ok["pending"].size(), pending.size() - 1);
  const auto again = call("POST", path, Json{{"labels", {{a, "anomaly"}}}}, 409);
  EXPECT_EQ(again["code"], "already_labeled");
  EXPECT_EQ(again["detail"]["label"], "normal");
  EXPECT_EQ(call("POST", path, Json{{"labels", Json::object()}}, 400)["code"],
            "invalid_request");
  (void)b;
}

TEST_F(ServiceTest, FullRunMatchesCliReport) {
  const auto sid = create(upload(), Json{{"strategy", "hybrid"}});
  label_all(sid);
  const auto st = call("GET", "/sessions/" + sid);
  EXPECT_EQ(st["phase"], "complete");
  EXPECT_EQ(call("GET", "/sessions/" + sid + "/candidates", nullptr, 409)["code"],
            "wrong_phase");
  EXPECT_EQ(call("POST", "/sessions/" + sid + "/labels",
                 Json{{"labels", {{syn_.dataset.id(0), "normal"}}}}, 409)["code"],
            "wrong_phase");

  const auto m = call("GET", "/sessions/" + sid + "/metrics");
  ASSERT_EQ(m["series"].size(), 3u);
  EXPECT_FALSE(m["summary"].is_null());
  EXPECT_EQ(m["ranking"]["rows"].size(), 20u);
  const std::string text = call("GET", "/sessions/" + sid + "/report");

  const auto dir = fs::temp_directory_path() / "sda2e_service_parity";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_csv(syn_.dataset, (dir / "dataset.csv").string());
  save_labels(syn_.dataset, syn_.labels, (dir / "labels.csv").string());
  const std::vector<std::string> args{
      "sda2e", "active", "--dataset", (dir / "dataset.csv").string(),
      "--labels", (dir / "labels.csv").string(), "--out", (dir / "out").string(),
      "--strategy", "hybrid", "--iterations", "3", "--budget", "4",
      "--epochs", "2", "--set", "batch_size=16"};
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  ASSERT_EQ(cli::run(static_cast<int>(argv.size()), argv.data(), out, err), 0)
      << err.str();
  std::istringstream svc(text);
  const auto cli_report = load_report((dir / "out" / "report.txt").string());
  EXPECT_EQ(report_body(parse_report(svc, "service")), report_body(cli_report));
  fs::remove_all(dir);
}

TEST_F(ServiceTest, PassiveSessionAndListing) {
  const auto sid = create(upload(), Json{{"strategy", "passive"},
                                         {"iterations", 2}});
  label_all(sid);
  const auto sessions = call("GET", "/sessions")["sessions"];
  ASSERT_EQ(sessions.size(), 1u);
  EXPECT_EQ(sessions[0]["phase"], "complete");
  const auto page = call("GET", "/sessions/" + sid + "/ranking", nullptr, 200,
                         {{"offset", "95"}, {"limit", "10"}});
  EXPECT_EQ(page["rows"].size(), 5u);
  EXPECT_EQ(page["rows"][0]["rank"], 96);
  EXPECT_EQ(call("GET", "/sessions/" + sid + "/ranking", nullptr, 400,
                 {{"limit", "x"}})["code"],
            "invalid_query");
}

TEST_F(ServiceTest, JournalDirectoryReceivesLines) {
  const auto dir = fs::temp_directory_path() / "sda2e_service_journal";
  fs::remove_all(dir);
  ServiceOptions o;
  o.journal_dir = dir.string();
  {
    ServiceCore core(o);
    const auto up = core.handle(
        "POST", "/datasets", {},
        Json{{"data", csv(syn_.dataset)}, {"labels", labels_csv(syn_)}}.dump());
    ASSERT_EQ(up.status, 201);
    const auto r = core.handle(
        "POST", "/sessions", {},
        Json{{"dataset", "d1"}, {"model", {{"epochs", 1}}}}.dump());
    ASSERT_EQ(r.status, 201) << r.body;
    core.wait_idle("s1");
  }
  std::ifstream in(dir / "s1.jsonl");
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(Json::parse(first)["type"], "session");
  fs::remove_all(dir);
}

TEST(HttpServer, ServesOverLoopback) {
  ServiceOptions o;
  o.port = 0;
  Server server(o);
  const int port = server.bind();
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(120, 0);

  auto health = client.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(Json::parse(health->body)["status"], "ok");

  const auto syn = small_data();
  auto up = client.Post("/datasets",
                        Json{{"data", csv(syn.dataset)},
                             {"labels", labels_csv(syn)}}
                            .dump(),
                        "application/json");
  ASSERT_TRUE(up);
  EXPECT_EQ(up->status, 201);
  auto s = client.Post("/sessions",
                       Json{{"dataset", "d1"},
                            {"session", {{"iterations", 1}}},
                            {"model", {{"epochs", 1}}}}
                           .dump(),
                       "application/json");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->status, 201);
  server.core().wait_idle("s1");
  auto c = client.Get("/sessions/s1/candidates");
  ASSERT_TRUE(c);
  EXPECT_EQ(c->status, 200);
  EXPECT_NE(c->get_header_value("Content-Type").find("application/json"),
            std::string::npos);
  auto missing = client.Get("/sessions/s9");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(Json::parse(missing->body)["code"], "unknown_session");

  server.stop();
  t.join();
}

}  // namespace
}  // namespace sda2e

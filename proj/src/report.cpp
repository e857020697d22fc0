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

#include "sda2e/report.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sda2e/error.hpp"
#include "sda2e/settings.hpp"

namespace sda2e {

std::vector<double> StrategyRun::ndcg_series() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.ndcg);
  return out;
}

StrategyRun strategy_run(const ActiveSession& session) {
  StrategyRun run;
  run.strategy = session.config().strategy;
  run.oracle_calls = session.oracle_calls();
  for (const auto& r : session.records()) {
    if (!r.ndcg) throw UndefinedMetricError("session has no ground truth");
    run.points.push_back({r.iteration, *r.ndcg, r.tau, r.queried.size(),
                          r.seconds});
  }
  return run;
}

RunReport session_report(const ActiveSession& session, std::string label,
                         std::string dataset_name) {
  RunReport r;
  r.label = std::move(label);
  r.dataset = std::move(dataset_name);
  r.dataset_checksum = session.dataset().checksum();
  r.rows = session.dataset().size();
  r.features = session.dataset().width();
  r.anomalies = session.truth() ? session.truth()->anomaly_count() : 0;
  r.session = session.config();
  r.model = session.model_config();
  r.runs.push_back(strategy_run(session));
  r.created = utc_timestamp();
  return r;
}

SummaryTriplet RunReport::summary() const {
  std::vector<std::vector<double>> active, passive;
  for (const auto& r : runs) {
    (r.strategy == Strategy::kPassive ? passive : active)
        .push_back(r.ndcg_series());
  }
  return summarize(active.empty() ? passive : active);
}

const StrategyRun* RunReport::find(Strategy s) const {
  for (const auto& r : runs) {
    if (r.strategy == s) return &r;
  }
  return nullptr;
}

std::string report_body(const RunReport& report) {
  Json j = Json::object();
  j["format"] = "sda2e-report 1";
  j["label"] = report.label;
  j["dataset"] = {{"name", report.dataset},
                  {"rows", report.rows},
                  {"features", report.features},
                  {"anomalies", report.anomalies},
                  {"checksum", hex64(report.dataset_checksum)}};
  Json session = Json::object();
  for (const auto& [k, v] : session_settings(report.session)) {
    if (k != "strategy") session[k] = v;
  }
  j["session"] = session;
  j["model"] = model_config_json(report.model);
  Json series = Json::array();
  for (const auto& run : report.runs) {
    Json points = Json::array();
    for (const auto& p : run.points) {
      points.push_back({{"iteration", p.iteration},
                        {"ndcg", p.ndcg},
                        {"tau", p.tau},
                        {"queried", p.queried}});
    }
    series.push_back({{"strategy", std::string(strategy_name(run.strategy))},
                      {"oracle_calls", run.oracle_calls},
                      {"points", points}});
  }
  j["series"] = series;
  if (!report.runs.empty()) {
    const auto s = report.summary();
    j["summary"] = {{"max_max", s.max_max},
                    {"max_mean", s.max_mean},
                    {"max_median", s.max_median}};
  }
  return j.dump(2) + "\n";
}

std::string report_meta_line(const RunReport& report) {
  Json meta = Json::object();
  meta["created"] = report.created;
  Json clock = Json::object();
  for (const auto& run : report.runs) {
    Json secs = Json::array();
    for (const auto& p : run.points) secs.push_back(p.seconds);
    clock[std::string(strategy_name(run.strategy))] = secs;
  }
  meta["wall_clock_seconds"] = clock;
  return "# meta " + meta.dump() + "\n";
}

void write_report(const RunReport& report, std::ostream& out) {
  out << report_meta_line(report) << report_body(report);
}

void save_report(const RunReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  write_report(report, out);
  if (!out) throw DataError("write failed for " + path);
}

RunReport parse_report(std::istream& in, const std::string& source) {
  std::ostringstream body;
  std::string line;
  Json meta;
  while (std::getline(in, line)) {
    if (line.rfind("# meta ", 0) == 0) {
      meta = Json::parse(line.substr(7), nullptr, false);
      continue;
    }
    if (!line.empty() && line.front() == '#') continue;
    body << line << '\n';
  }
  RunReport r;
  try {
    const Json j = Json::parse(body.str());
    if (j.at("format").get<std::string>() != "sda2e-report 1") {
      throw DataError(source + ": unsupported report format");
    }
    r.label = j.at("label").get<std::string>();
    const Json& ds = j.at("dataset");
    r.dataset = ds.at("name").get<std::string>();
    r.rows = ds.at("rows").get<std::size_t>();
    r.features = ds.at("features").get<std::size_t>();
    r.anomalies = ds.at("anomalies").get<std::size_t>();
    r.dataset_checksum =
        std::stoull(ds.at("checksum").get<std::string>(), nullptr, 16);
    r.session = session_config_from_json(j.at("session"));
    r.model = model_config_from_json(j.at("model"));
    for (const Json& s : j.at("series")) {
      StrategyRun run;
      run.strategy = parse_strategy(s.at("strategy").get<std::string>());
      run.oracle_calls = s.at("oracle_calls").get<std::size_t>();
      for (const Json& p : s.at("points")) {
        run.points.push_back({p.at("iteration").get<std::size_t>(),
                              p.at("ndcg").get<double>(),
                              p.at("tau").get<double>(),
                              p.at("queried").get<std::size_t>(), 0.0});
      }
      r.runs.push_back(std::move(run));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": malformed report: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(source + ": malformed report: " + e.what());
  }
  if (meta.is_object()) {
    r.created = meta.value("created", "");
    const Json clock = meta.value("wall_clock_seconds", Json::object());
    for (auto& run : r.runs) {
      const auto key = std::string(strategy_name(run.strategy));
      if (!clock.contains(key)) continue;
      const Json& secs = clock.at(key);
      for (std::size_t i = 0; i < run.points.size() && i < secs.size(); ++i) {
        run.points[i].seconds = secs[i].get<double>();
      }
    }
  }
  return r;
}

RunReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return parse_report(in, path);
}

void write_series_csv(const RunReport& report, std::ostream& out) {
  out << "iteration,strategy,nDCG,tau,queried_count\n";
  for (const auto& run : report.runs) {
    for (const auto& p : run.points) {
      out << p.iteration << ',' << strategy_name(run.strategy) << ','
          << format_double(p.ndcg) << ',' << format_double(p.tau) << ','
          << p.queried << '\n';
    }
  }
}

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace sda2e

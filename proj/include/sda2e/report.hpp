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

#ifndef SDA2E_REPORT_HPP_
#define SDA2E_REPORT_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sda2e/active.hpp"
#include "sda2e/eval.hpp"
#include "sda2e/model.hpp"

namespace sda2e {

struct SeriesPoint {
  std::size_t iteration = 0;
  double ndcg = 0.0;
  double tau = 0.0;
  std::size_t queried = 0;
  double seconds = 0.0;  // meta only
};

struct StrategyRun {
  Strategy strategy = Strategy::kPassive;
  std::size_t oracle_calls = 0;
  std::vector<SeriesPoint> points;

  std::vector<double> ndcg_series() const;
};

// Needs a session with ground truth, since every point carries an nDCG.
StrategyRun strategy_run(const ActiveSession& session);

struct RunReport {
  std::string label;
  std::string dataset;  // display name
  std::uint64_t dataset_checksum = 0;
  std::size_t rows = 0;
  std::size_t features = 0;
  std::size_t anomalies = 0;
  SessionConfig session;
  Sda2eConfig model;
  std::vector<StrategyRun> runs;
  std::string created;  // meta only

  // Summary over the S1/S2/Hybrid series; a report holding only Passive is
  // summarized over Passive.
  SummaryTriplet summary() const;
  const StrategyRun* find(Strategy s) const;
};

// One-run report for a finished (or partial) session with ground truth.
RunReport session_report(const ActiveSession& session, std::string label,
                         std::string dataset_name);

// Deterministic part: everything except timestamps and wall clock.
std::string report_body(const RunReport& report);
// `# meta {...}` with the creation time and per-iteration wall clock.
std::string report_meta_line(const RunReport& report);
// Meta line, then the body.
void write_report(const RunReport& report, std::ostream& out);
void save_report(const RunReport& report, const std::string& path);
// Skips `#` lines. Throws DataError on malformed input.
RunReport parse_report(std::istream& in, const std::string& source);
RunReport load_report(const std::string& path);

// iteration,strategy,nDCG,tau,queried_count
void write_series_csv(const RunReport& report, std::ostream& out);

// ISO-8601 UTC, second resolution.
std::string utc_timestamp();

}  // namespace sda2e

#endif  // SDA2E_REPORT_HPP_

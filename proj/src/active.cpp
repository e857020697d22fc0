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

#include "sda2e/active.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sda2e/error.hpp"
#include "sda2e/eval.hpp"
#include "sda2e/kernels.hpp"
#include "sda2e/rng.hpp"
#include "sda2e/scoring.hpp"
#include "sda2e/settings.hpp"

namespace sda2e {
namespace {

// Descending score, ascending index.
auto by_score(std::span<const double> scores) {
  return [scores](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
}

// Per-anchor thresholded union shared by both strategies.
std::vector<std::size_t> anchored_union(
    std::span<const std::size_t> anchors,
    std::span<const std::size_t> unlabeled, std::span<const BitVector> rows,
    Metric metric, double percentile, std::vector<AnchorThreshold>& thresholds) {
  thresholds.clear();
  if (anchors.empty() || unlabeled.empty()) return {};
  std::vector<std::uint8_t> hit(rows.size(), 0);
  std::vector<double> sims(unlabeled.size());
  for (std::size_t anchor : anchors) {
    kernels::similarity_scan_omp(rows[anchor], rows, unlabeled, metric, sims);
    const double thr = percentile_threshold(sims, percentile);
    thresholds.push_back({anchor, thr});
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      if (sims[j] >= thr) hit[unlabeled[j]] = 1;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < hit.size(); ++i) {
    if (hit[i] != 0) out.push_back(i);
  }
  return out;
}

std::uint64_t ranking_digest(std::span<const std::size_t> ranking) {
  std::string bytes;
  bytes.reserve(ranking.size() * 8);
  for (std::size_t r : ranking) {
    const auto v = static_cast<std::uint64_t>(r);
    for (int b = 0; b < 8; ++b) {
      bytes.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
    }
  }
  return fnv1a64(bytes);
}

Json ids_json(const BinaryDataset& data, std::span<const std::size_t> rows) {
  Json out = Json::array();
  for (std::size_t r : rows) out.push_back(data.id(r));
  return out;
}

Json thresholds_json(const BinaryDataset& data,
                     std::span<const AnchorThreshold> t) {
  Json out = Json::array();
  for (const auto& a : t) out.push_back(Json::array({data.id(a.anchor), a.threshold}));
  return out;
}

Json record_json(const BinaryDataset& data, const IterationRecord& r) {
  Json j = Json::object();
  j["type"] = "iteration";
  j["iteration"] = r.iteration;
  j["pool_size"] = r.pool_size;
  j["retrained"] = r.retrained;
  j["expanded"] = ids_json(data, r.expanded);
  j["rho"] = thresholds_json(data, r.rho);
  j["priority"] = ids_json(data, r.priority);
  j["xi"] = thresholds_json(data, r.xi);
  j["ndcg"] = r.ndcg ? Json(*r.ndcg) : Json(nullptr);
  j["ranking_digest"] = hex64(r.ranking_digest);
  j["tau"] = r.tau;
  j["queried"] = ids_json(data, r.queried);
  return j;
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kS1: return "s1";
    case Strategy::kS2: return "s2";
    case Strategy::kHybrid: return "hybrid";
    case Strategy::kPassive: return "passive";
  }
  return "passive";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::kS1, Strategy::kS2, Strategy::kHybrid,
                     Strategy::kPassive}) {
    if (strategy_name(s) == name) return s;
  }
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (expected s1|s2|hybrid|passive)");
}

std::string_view retrain_policy_name(RetrainPolicy p) {
  return p == RetrainPolicy::kWarmStart ? "warm_start" : "from_scratch";
}

RetrainPolicy parse_retrain_policy(std::string_view name) {
  if (name == "from_scratch") return RetrainPolicy::kFromScratch;
  if (name == "warm_start") return RetrainPolicy::kWarmStart;
  throw ConfigError("unknown retrain policy '" + std::string(name) +
                    "' (expected from_scratch|warm_start)");
}

void SessionConfig::validate() const {
  if (iterations < 1) throw ConfigError("T >= 1 (iterations)");
  if (budget < 1) throw ConfigError("Q >= 1 (budget)");
  if (!(error_percentile > 0.0 && error_percentile < 100.0)) {
    throw ConfigError("error percentile must be in (0, 100)");
  }
  if (!(sim_percentile > 0.0 && sim_percentile < 100.0)) {
    throw ConfigError("similarity percentile must be in (0, 100)");
  }
  if (!(cold_start_fraction > 0.0 && cold_start_fraction <= 1.0)) {
    throw ConfigError("cold start fraction must be in (0, 1]");
  }
  if (ndcg_at && *ndcg_at == 0) throw ConfigError("ndcg cutoff must be >= 1");
}

Label SimulatedOracle::label(std::size_t row) {
  ++calls_;
  auto it = cache_.find(row);
  if (it != cache_.end()) return it->second;
  const Label l = truth_->at(row);
  cache_.emplace(row, l);
  return l;
}

LabeledSets::LabeledSets(std::size_t n)
    : pool_(n, 0), answer_(n, -1), unlabeled_count_(n) {}

std::optional<Label> LabeledSets::answer(std::size_t i) const {
  const auto a = answer_.at(i);
  if (a < 0) return std::nullopt;
  return a == 1 ? Label::kAnomaly : Label::kNormal;
}

std::vector<std::size_t> LabeledSets::pool() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    if (pool_[i] != 0) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> LabeledSets::unlabeled() const {
  std::vector<std::size_t> out;
  out.reserve(unlabeled_count_);
  for (std::size_t i = 0; i < answer_.size(); ++i) {
    if (answer_[i] < 0) out.push_back(i);
  }
  return out;
}

std::size_t LabeledSets::pool_size() const {
  return static_cast<std::size_t>(
      std::count(pool_.begin(), pool_.end(), std::uint8_t{1}));
}

bool LabeledSets::add_to_pool(std::size_t i) {
  if (answer_.at(i) == 1 || pool_[i] != 0) return false;
  pool_[i] = 1;
  return true;
}

void LabeledSets::record(std::size_t i, Label label) {
  if (answer_.at(i) >= 0) {
    throw std::invalid_argument("row " + std::to_string(i) +
                                " is already labeled");
  }
  --unlabeled_count_;
  if (label == Label::kAnomaly) {
    answer_[i] = 1;
    pool_[i] = 0;
    anomalies_.push_back(i);
  } else {
    answer_[i] = 0;
    pool_[i] = 1;
    normals_.push_back(i);
  }
}

CandidateSelection select_candidates(std::span<const double> scores,
                                     const LabeledSets& sets,
                                     double percentile, std::size_t budget) {
  if (scores.size() != sets.size()) {
    throw DimensionError("scores and labeled sets differ in length");
  }
  if (budget < 1) throw ConfigError("Q >= 1 (budget)");
  CandidateSelection out;
  const auto unlabeled = sets.unlabeled();
  if (unlabeled.empty()) {
    out.complete = true;
    return out;
  }
  std::vector<double> values(unlabeled.size());
  for (std::size_t j = 0; j < unlabeled.size(); ++j) {
    values[j] = scores[unlabeled[j]];
  }
  out.tau = percentile_threshold(values, percentile);
  for (std::size_t r : unlabeled) {
    if (scores[r] > out.tau) out.rows.push_back(r);
  }
  const std::size_t keep = std::min(budget, out.rows.size());
  std::partial_sort(out.rows.begin(),
                    out.rows.begin() + static_cast<std::ptrdiff_t>(keep),
                    out.rows.end(), by_score(scores));
  out.rows.resize(keep);
  return out;
}

Expansion strategy1_expand(std::span<const std::size_t> normals,
                           std::span<const std::size_t> unlabeled,
                           std::span<const BitVector> rows, Metric metric,
                           double percentile) {
  Expansion out;
  out.rows = anchored_union(normals, unlabeled, rows, metric, percentile,
                            out.thresholds);
  return out;
}

Prioritization strategy2_prioritize(std::span<const std::size_t> anomalies,
                                    std::span<const std::size_t> unlabeled,
                                    std::span<const BitVector> rows,
                                    Metric metric, double percentile,
                                    std::span<const double> scores) {
  Prioritization out;
  if (scores.size() != rows.size()) {
    throw DimensionError("scores and rows differ in length");
  }
  out.similar = anchored_union(anomalies, unlabeled, rows, metric, percentile,
                               out.thresholds);
  std::vector<std::size_t> head(anomalies.begin(), anomalies.end());
  std::stable_sort(head.begin(), head.end(), by_score(scores));
  std::vector<std::size_t> tail = out.similar;
  std::stable_sort(tail.begin(), tail.end(), by_score(scores));
  std::vector<std::uint8_t> seen(rows.size(), 0);
  for (const auto* part : {&head, &tail}) {
    for (std::size_t r : *part) {
      if (seen[r] == 0) {
        seen[r] = 1;
        out.priority.push_back(r);
      }
    }
  }
  return out;
}

std::vector<std::size_t> build_ranking(std::span<const double> scores,
                                       std::span<const std::size_t> priority) {
  const std::size_t n = scores.size();
  std::vector<std::uint8_t> placed(n, 0);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t r : priority) {
    if (r >= n) throw std::out_of_range("priority row outside the dataset");
    if (placed[r] == 0) {
      placed[r] = 1;
      out.push_back(r);
    }
  }
  const std::size_t head = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (placed[i] == 0) out.push_back(i);
  }
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(head), out.end(),
            by_score(scores));
  return out;
}

bool operator==(const IterationRecord& a, const IterationRecord& b) {
  return a.iteration == b.iteration && a.tau == b.tau &&
         a.queried == b.queried && a.answers == b.answers &&
         a.expanded == b.expanded && a.rho == b.rho &&
         a.priority == b.priority && a.xi == b.xi &&
         a.pool_size == b.pool_size && a.retrained == b.retrained &&
         a.ndcg == b.ndcg && a.ranking_digest == b.ranking_digest;
}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::kCreated: return "created";
    case Phase::kTraining: return "training";
    case Phase::kAwaitingLabels: return "awaiting_labels";
    case Phase::kRetraining: return "retraining";
    case Phase::kComplete: return "complete";
  }
  return "created";
}

ActiveSession::ActiveSession(const BinaryDataset& data, const LabelMap* truth,
                             SessionConfig config, Sda2eConfig model_config)
    : data_(&data), truth_(truth), config_(config) {
  config_.validate();
  if (data.empty()) throw DataError("dataset has no rows");
  if (model_config.d == 0) model_config.d = data.width();
  if (model_config.d != data.width()) {
    throw ConfigError("model d=" + std::to_string(model_config.d) +
                      " does not match dataset width " +
                      std::to_string(data.width()));
  }
  model_config_ = model_config.resolved();
  model_config_.validate();
  if (truth_ != nullptr) {
    if (truth_->size() != data.size()) {
      throw DataError("label count does not match dataset");
    }
    if (truth_->anomaly_count() == 0) {
      throw UndefinedMetricError(
          "labels contain no anomaly, nDCG is undefined");
    }
    relevance_ = truth_->relevance();
  }
  sets_ = LabeledSets(data.size());
}

void ActiveSession::emit(std::string_view line) const {
  if (journal_) journal_(line);
}

std::string session_header_line(const ActiveSession& session) {
  Json j = Json::object();
  j["type"] = "session";
  j["version"] = 1;
  const auto& data = session.dataset();
  j["dataset"] = {{"rows", data.size()},
                  {"features", data.width()},
                  {"checksum", hex64(data.checksum())}};
  j["session"] = session_config_json(session.config());
  j["model"] = model_config_json(session.model_config());
  return j.dump();
}

void ActiveSession::fit(std::uint64_t seed, bool from_scratch) {
  const auto pool = sets_.pool();
  if (pool.empty()) throw TrainingError("training pool X_l is empty");
  const Matrix x = data_->dense(pool);
  if (from_scratch) {
    Sda2eConfig cfg = model_config_;
    cfg.seed = seed;
    model_ = train(x, cfg).model;
  } else {
    train_in_place(model_, x, model_config_.epochs,
                   derive_seed(seed, "shuffle"));
  }
}

void ActiveSession::rescore() { scores_ = score_all(model_, data_->rows()); }

void ActiveSession::start() {
  if (phase_ != Phase::kCreated) throw PhaseError("session already started");
  phase_ = Phase::kTraining;
  const auto started = std::chrono::steady_clock::now();
  emit(session_header_line(*this));

  const std::size_t n = data_->size();
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(
          config_.cold_start_fraction * static_cast<double>(n))),
      1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config_.seed, "cold-start"));
  rng.shuffle(std::span<std::size_t>(order));
  for (std::size_t i = 0; i < count; ++i) sets_.add_to_pool(order[i]);

  fit(derive_seed(config_.seed, "model", 0), true);
  rescore();

  IterationRecord record;
  record.iteration = 0;
  record.retrained = true;
  record.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  finish_iteration(std::move(record));
}

void ActiveSession::finish_iteration(IterationRecord record) {
  const auto started = std::chrono::steady_clock::now();
  record.pool_size = sets_.pool_size();
  const auto unlabeled = sets_.unlabeled();
  if (config_.strategy == Strategy::kS2 ||
      config_.strategy == Strategy::kHybrid) {
    auto pr = strategy2_prioritize(sets_.anomalies(), unlabeled,
                                   data_->rows(), config_.metric,
                                   config_.sim_percentile, scores_);
    record.priority = std::move(pr.priority);
    record.xi = std::move(pr.thresholds);
  }
  ranking_ = build_ranking(scores_, record.priority);
  record.ranking_digest = ranking_digest(ranking_);
  if (!relevance_.empty()) {
    record.ndcg = ndcg(ranking_, relevance_, config_.ndcg_at);
  }
  const auto selection = select_candidates(
      scores_, sets_, config_.error_percentile, config_.budget);
  record.tau = selection.tau;
  record.queried = selection.rows;
  issued_ = selection.rows;
  submitted_.clear();
  record.seconds += std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - started)
                        .count();
  records_.push_back(record);
  emit(record_json(*data_, record).dump());
  if (issued_.empty()) {
    phase_ = Phase::kComplete;
    emit(R"({"type":"complete"})");
  } else {
    phase_ = Phase::kAwaitingLabels;
  }
  if (hook_) hook_(*this, records_.back());
}

std::vector<std::size_t> ActiveSession::pending() const {
  std::vector<std::size_t> out;
  for (std::size_t r : issued_) {
    if (!sets_.is_labeled(r)) out.push_back(r);
  }
  return out;
}

void ActiveSession::submit(std::size_t row, Label label) {
  if (phase_ != Phase::kAwaitingLabels) {
    throw PhaseError("labels are accepted only while awaiting labels (phase " +
                     std::string(phase_name(phase_)) + ")");
  }
  if (row >= data_->size()) throw std::invalid_argument("unknown row");
  if (sets_.is_labeled(row)) {
    throw std::invalid_argument("row '" + data_->id(row) +
                                "' is already labeled");
  }
  if (std::find(issued_.begin(), issued_.end(), row) == issued_.end()) {
    throw std::invalid_argument("row '" + data_->id(row) +
                                "' is not pending");
  }
  sets_.record(row, label);
  ++oracle_calls_;
  submitted_.push_back({row, label});
  records_.back().answers.push_back({row, label});
  Json j = Json::object();
  j["type"] = "label";
  j["iteration"] = iteration_;
  j["id"] = data_->id(row);
  j["label"] = std::string(label_name(label));
  emit(j.dump());
}

bool ActiveSession::ready() const {
  return phase_ == Phase::kAwaitingLabels && pending().empty();
}

void ActiveSession::advance() {
  if (phase_ != Phase::kAwaitingLabels) {
    throw PhaseError("advance needs phase awaiting_labels (phase " +
                     std::string(phase_name(phase_)) + ")");
  }
  if (!pending().empty()) {
    throw PhaseError(std::to_string(pending().size()) +
                     " queried row(s) still need a label");
  }
  if (iteration_ + 1 >= config_.iterations) {
    phase_ = Phase::kComplete;
    emit(R"({"type":"complete"})");
    return;
  }
  phase_ = Phase::kRetraining;
  const auto started = std::chrono::steady_clock::now();
  ++iteration_;
  IterationRecord record;
  record.iteration = iteration_;
  if (config_.strategy == Strategy::kS1 ||
      config_.strategy == Strategy::kHybrid) {
    auto ex = strategy1_expand(sets_.normals(), sets_.unlabeled(),
                               data_->rows(), config_.metric,
                               config_.sim_percentile);
    for (std::size_t r : ex.rows) {
      if (sets_.add_to_pool(r)) record.expanded.push_back(r);
    }
    record.rho = std::move(ex.thresholds);
    fit(derive_seed(config_.seed, "model", iteration_),
        config_.retrain == RetrainPolicy::kFromScratch);
    rescore();
    record.retrained = true;
  }
  record.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  finish_iteration(std::move(record));
}

void run_to_completion(ActiveSession& session, Oracle& oracle) {
  if (session.phase() == Phase::kCreated) session.start();
  while (session.phase() == Phase::kAwaitingLabels) {
    for (std::size_t r : session.pending()) session.submit(r, oracle.label(r));
    session.advance();
  }
}

void replay_journal(ActiveSession& session, std::string_view journal) {
  if (session.phase() != Phase::kCreated) {
    throw PhaseError("replay needs a fresh session");
  }
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < journal.size()) {
    auto nl = journal.find('\n', start);
    if (nl == std::string_view::npos) nl = journal.size();
    if (nl > start) lines.push_back(journal.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty()) throw DataError("journal is empty");

  auto saved = std::move(session.journal_);
  std::vector<std::string> produced;
  session.journal_ = [&](std::string_view line) {
    produced.emplace_back(line);
  };
  auto check = [&] {
    for (std::size_t i = 0; i < produced.size(); ++i) {
      if (i >= lines.size() || produced[i] != lines[i]) {
        throw DataError("journal diverges from recomputation at line " +
                        std::to_string(i + 1));
      }
    }
  };
  try {
    session.start();
    check();
    while (produced.size() < lines.size()) {
      const std::size_t i = produced.size();
      const Json j = Json::parse(lines[i]);
      if (j.at("type").get<std::string>() != "label") {
        throw DataError("journal line " + std::to_string(i + 1) +
                        " was not reproduced");
      }
      const auto row = session.dataset().find(j.at("id").get<std::string>());
      if (!row) throw DataError("journal labels an unknown row");
      session.submit(*row, parse_label(j.at("label").get<std::string>()));
      // Advance only if the journal shows the original session did.
      if (session.ready() && produced.size() < lines.size()) {
        session.advance();
      }
      check();
    }
  } catch (const nlohmann::json::exception& e) {
    session.journal_ = std::move(saved);
    throw DataError(std::string("malformed journal: ") + e.what());
  } catch (...) {
    session.journal_ = std::move(saved);
    throw;
  }
  session.journal_ = std::move(saved);
}

}  // namespace sda2e

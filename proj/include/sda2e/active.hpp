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

#ifndef SDA2E_ACTIVE_HPP_
#define SDA2E_ACTIVE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sda2e/data.hpp"
#include "sda2e/model.hpp"
#include "sda2e/similarity.hpp"

namespace sda2e {

enum class Strategy { kS1, kS2, kHybrid, kPassive };
enum class RetrainPolicy { kFromScratch, kWarmStart };

std::string_view strategy_name(Strategy s);  // s1 | s2 | hybrid | passive
Strategy parse_strategy(std::string_view name);
std::string_view retrain_policy_name(RetrainPolicy p);
RetrainPolicy parse_retrain_policy(std::string_view name);

struct SessionConfig {
  Strategy strategy = Strategy::kHybrid;
  std::size_t iterations = 20;      // T
  std::size_t budget = 10;          // Q, oracle queries per iteration
  double error_percentile = 80.0;   // tau
  double sim_percentile = 80.0;     // per-anchor similarity thresholds
  Metric metric = Metric::kNm1;
  RetrainPolicy retrain = RetrainPolicy::kFromScratch;
  std::optional<std::size_t> ndcg_at;
  double cold_start_fraction = 0.1;
  std::uint64_t seed = 42;

  // Throws ConfigError naming the violated invariant.
  void validate() const;
  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

// Label source for queried rows. Answers must be stable per row.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual Label label(std::size_t row) = 0;
};

// Answers from ground truth, caching each answer and counting calls.
class SimulatedOracle : public Oracle {
 public:
  explicit SimulatedOracle(const LabelMap& truth) : truth_(&truth) {}
  Label label(std::size_t row) override;
  std::size_t calls() const { return calls_; }

 private:
  const LabelMap* truth_;
  std::map<std::size_t, Label> cache_;
  std::size_t calls_ = 0;
};

// Membership state per row. `unlabeled` means not yet answered by the
// oracle; rows in the training pool X_l may still be unlabeled.
class LabeledSets {
 public:
  LabeledSets() = default;
  explicit LabeledSets(std::size_t n);

  std::size_t size() const { return pool_.size(); }
  bool in_pool(std::size_t i) const { return pool_.at(i) != 0; }
  bool is_labeled(std::size_t i) const { return answer_.at(i) >= 0; }
  std::optional<Label> answer(std::size_t i) const;

  // Confirmed rows in the order they were labeled.
  const std::vector<std::size_t>& normals() const { return normals_; }
  const std::vector<std::size_t>& anomalies() const { return anomalies_; }

  std::vector<std::size_t> pool() const;
  std::vector<std::size_t> unlabeled() const;
  std::size_t pool_size() const;
  std::size_t unlabeled_count() const { return unlabeled_count_; }

  // Adds to X_l; ignored for confirmed anomalies. Returns true if new.
  bool add_to_pool(std::size_t i);
  // Records an oracle answer. Normals join X_l, anomalies leave it. Throws
  // std::invalid_argument on a relabel.
  void record(std::size_t i, Label label);

 private:
  std::vector<std::uint8_t> pool_;
  std::vector<std::int8_t> answer_;  // -1 unanswered, 0 normal, 1 anomaly
  std::vector<std::size_t> normals_;
  std::vector<std::size_t> anomalies_;
  std::size_t unlabeled_count_ = 0;
};

struct CandidateSelection {
  double tau = 0.0;
  std::vector<std::size_t> rows;  // descending score, ties by row index
  bool complete = false;          // no unlabeled rows remain
};

// tau is the percentile of unlabeled scores; candidates are unlabeled rows
// with score > tau, best first, at most `budget`.
CandidateSelection select_candidates(std::span<const double> scores,
                                     const LabeledSets& sets,
                                     double percentile, std::size_t budget);

struct AnchorThreshold {
  std::size_t anchor = 0;
  double threshold = 0.0;
  friend bool operator==(const AnchorThreshold&,
                         const AnchorThreshold&) = default;
};

struct Expansion {
  std::vector<std::size_t> rows;  // ascending row index
  std::vector<AnchorThreshold> thresholds;
};

// Union over anchors n of {x in unlabeled : S(x, n) >= rho_n}, rho_n the
// percentile of that anchor's similarities to the unlabeled rows.
Expansion strategy1_expand(std::span<const std::size_t> normals,
                           std::span<const std::size_t> unlabeled,
                           std::span<const BitVector> rows, Metric metric,
                           double percentile);

struct Prioritization {
  std::vector<std::size_t> priority;  // R_priority
  std::vector<std::size_t> similar;   // X_sim, ascending row index
  std::vector<AnchorThreshold> thresholds;
};

// R_priority = anomalies by descending score, then X_sim by descending score,
// first occurrence kept.
Prioritization strategy2_prioritize(std::span<const std::size_t> anomalies,
                                    std::span<const std::size_t> unlabeled,
                                    std::span<const BitVector> rows,
                                    Metric metric, double percentile,
                                    std::span<const double> scores);

// Priority rows first, then everything else by descending score; ties by
// ascending row index. Always a permutation of 0..n-1.
std::vector<std::size_t> build_ranking(std::span<const double> scores,
                                       std::span<const std::size_t> priority);

struct LabelEvent {
  std::size_t row = 0;
  Label label = Label::kNormal;
  friend bool operator==(const LabelEvent&, const LabelEvent&) = default;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double tau = 0.0;
  std::vector<std::size_t> queried;     // candidates issued this iteration
  std::vector<LabelEvent> answers;      // labels consumed by this iteration
  std::vector<std::size_t> expanded;    // newly added to X_l (S1)
  std::vector<AnchorThreshold> rho;     // S1 thresholds
  std::vector<std::size_t> priority;    // R_priority (S2)
  std::vector<AnchorThreshold> xi;      // S2 thresholds
  std::size_t pool_size = 0;            // |X_l| used for the model
  bool retrained = false;
  std::optional<double> ndcg;
  std::uint64_t ranking_digest = 0;     // FNV-1a of the ranking
  double seconds = 0.0;                 // wall clock, not part of equality

  friend bool operator==(const IterationRecord& a, const IterationRecord& b);
};

enum class Phase { kCreated, kTraining, kAwaitingLabels, kRetraining,
                   kComplete };
std::string_view phase_name(Phase p);

// The active-learning loop as an explicit state machine, so the same engine serves the
// batch CLI (simulated oracle) and the service (deferred human labels).
//
//   start()  -> train on cold-start pool, record iteration 0, issue queries
//   submit() -> record one answer for a pending row
//   advance() once nothing is pending -> strategy step, optional retrain,
//             record next iteration, issue next queries or complete
class ActiveSession {
 public:
  using Sink = std::function<void(std::string_view line)>;
  using IterationHook =
      std::function<void(const ActiveSession&, const IterationRecord&)>;

  // `truth` is optional and only feeds nDCG. The dataset and truth must
  // outlive the session.
  ActiveSession(const BinaryDataset& data, const LabelMap* truth,
                SessionConfig config, Sda2eConfig model_config);

  void set_journal(Sink sink) { journal_ = std::move(sink); }
  void set_iteration_hook(IterationHook hook) { hook_ = std::move(hook); }

  void start();
  // Throws PhaseError outside awaiting-labels, std::invalid_argument for rows
  // that are not pending.
  void submit(std::size_t row, Label label);
  bool ready() const;
  void advance();

  Phase phase() const { return phase_; }
  const SessionConfig& config() const { return config_; }
  const Sda2eConfig& model_config() const { return model_config_; }
  const BinaryDataset& dataset() const { return *data_; }
  const LabelMap* truth() const { return truth_; }
  std::size_t iteration() const { return iteration_; }
  // Rows issued this iteration still waiting for an answer.
  std::vector<std::size_t> pending() const;
  const std::vector<std::size_t>& issued() const { return issued_; }
  const std::vector<LabelEvent>& submitted() const { return submitted_; }
  const LabeledSets& sets() const { return sets_; }
  const std::vector<double>& scores() const { return scores_; }
  const std::vector<std::size_t>& ranking() const { return ranking_; }
  const std::vector<IterationRecord>& records() const { return records_; }
  const Sda2eModel& model() const { return model_; }
  std::size_t oracle_calls() const { return oracle_calls_; }

 private:
  void fit(std::uint64_t seed, bool from_scratch);
  void rescore();
  void finish_iteration(IterationRecord record);
  void emit(std::string_view line) const;
  friend void replay_journal(ActiveSession& session, std::string_view journal);

  const BinaryDataset* data_;
  const LabelMap* truth_;
  SessionConfig config_;
  Sda2eConfig model_config_;
  Phase phase_ = Phase::kCreated;
  std::size_t iteration_ = 0;
  LabeledSets sets_;
  Sda2eModel model_;
  std::vector<double> scores_;
  std::vector<std::size_t> ranking_;
  std::vector<std::size_t> issued_;
  std::vector<LabelEvent> submitted_;
  std::vector<IterationRecord> records_;
  std::size_t oracle_calls_ = 0;
  std::vector<std::uint8_t> relevance_;
  Sink journal_;
  IterationHook hook_;
};

// Drives a session to completion, answering every query from `oracle`.
void run_to_completion(ActiveSession& session, Oracle& oracle);

// Rebuilds a session from its journal text by re-running it with the
// journaled answers. Throws DataError if the journal does not match the
// dataset or the recomputed iterations disagree with the journaled ones.
// The session's own journal sink is not called during replay.
void replay_journal(ActiveSession& session, std::string_view journal);

std::string session_header_line(const ActiveSession& session);

}  // namespace sda2e

#endif  // SDA2E_ACTIVE_HPP_

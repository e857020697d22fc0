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
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "sda2e/error.hpp"
#include "sda2e/rng.hpp"

namespace sda2e {
namespace {

std::set<std::size_t> bits(const BitVector& v) {
  std::set<std::size_t> s;
  for (std::size_t j = 0; j < v.width(); ++j) {
    if (v.test(j)) s.insert(j);
  }
  return s;
}

double nm1_oracle(const BitVector& a, const BitVector& b) {
  const auto sa = bits(a), sb = bits(b);
  if (sa.empty() && sb.empty()) return 1.0;
  if (sa.empty() || sb.empty()) return 0.0;
  std::size_t both = 0;
  for (auto j : sa) both += sb.count(j);
  return static_cast<double>(both) /
         static_cast<double>(std::max(sa.size(), sb.size()));
}

double percentile_oracle(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double rank = std::ceil(p * static_cast<double>(v.size()) / 100.0);
  const auto idx = static_cast<std::size_t>(
      std::clamp(rank - 1.0, 0.0, static_cast<double>(v.size() - 1)));
  return v[idx];
}

std::vector<BitVector> random_rows(std::size_t n, std::size_t d,
                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BitVector> rows;
  for (std::size_t i = 0; i < n; ++i) {
    BitVector v(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (rng.bernoulli(0.3)) v.set(j);
    }
    rows.push_back(std::move(v));
  }
  return rows;
}

// Union over anchors of unlabeled rows at or above the anchor's percentile.
std::set<std::size_t> union_oracle(const std::vector<std::size_t>& anchors,
                                   const std::vector<std::size_t>& unlabeled,
                                   const std::vector<BitVector>& rows,
                                   double p) {
  std::set<std::size_t> out;
  for (auto a : anchors) {
    std::vector<double> s;
    for (auto u : unlabeled) s.push_back(nm1_oracle(rows[a], rows[u]));
    const double thr = percentile_oracle(s, p);
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      if (s[j] >= thr) out.insert(unlabeled[j]);
    }
  }
  return out;
}

TEST(LabeledSets, Membership) {
  LabeledSets s(5);
  EXPECT_EQ(s.unlabeled_count(), 5u);
  EXPECT_TRUE(s.add_to_pool(1));
  EXPECT_FALSE(s.add_to_pool(1));
  s.record(2, Label::kAnomaly);
  s.record(3, Label::kNormal);
  EXPECT_FALSE(s.add_to_pool(2));
  EXPECT_EQ(s.pool(), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(s.unlabeled(), (std::vector<std::size_t>{0, 1, 4}));
  EXPECT_EQ(s.answer(2), Label::kAnomaly);
  EXPECT_FALSE(s.answer(1));
  EXPECT_THROW(s.record(3, Label::kAnomaly), std::invalid_argument);
}

TEST(LabeledSets, AnomalyLeavesPool) {
  LabeledSets s(3);
  s.add_to_pool(0);
  s.record(0, Label::kAnomaly);
  EXPECT_EQ(s.pool_size(), 0u);
  EXPECT_EQ(s.anomalies(), (std::vector<std::size_t>{0}));
}

TEST(SelectCandidates, MatchesOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng.below(40);
    std::vector<double> scores(n);
    for (auto& s : scores) s = std::floor(rng.uniform() * 8.0);  // many ties
    LabeledSets sets(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.bernoulli(0.2)) sets.record(i, Label::kNormal);
    }
    const std::size_t q = 1 + rng.below(6);
    const auto got = select_candidates(scores, sets, 80.0, q);

    std::vector<double> vals;
    std::vector<std::size_t> over;
    for (auto u : sets.unlabeled()) vals.push_back(scores[u]);
    if (vals.empty()) {
      EXPECT_TRUE(got.complete);
      continue;
    }
    const double tau = percentile_oracle(vals, 80.0);
    for (auto u : sets.unlabeled()) {
      if (scores[u] > tau) over.push_back(u);
    }
    std::stable_sort(over.begin(), over.end(), [&](auto a, auto b) {
      return scores[a] > scores[b];
    });
    over.resize(std::min(over.size(), q));
    EXPECT_EQ(got.tau, tau);
    EXPECT_EQ(got.rows, over);
  }
}

TEST(SelectCandidates, AllEqualScoresSelectNothing) {
  const std::vector<double> scores(10, 2.0);
  LabeledSets sets(10);
  const auto got = select_candidates(scores, sets, 80.0, 5);
  EXPECT_TRUE(got.rows.empty());
  EXPECT_FALSE(got.complete);
}

TEST(SelectCandidates, Errors) {
  LabeledSets sets(3);
  const std::vector<double> two(2, 0.0), three(3, 0.0);
  EXPECT_THROW(select_candidates(two, sets, 80.0, 1), DimensionError);
  EXPECT_THROW(select_candidates(three, sets, 80.0, 0), ConfigError);
}

TEST(Strategy1, MatchesUnionOracle) {
  const auto rows = random_rows(60, 24, 3);
  const std::vector<std::size_t> normals{4, 17, 30};
  std::vector<std::size_t> unlabeled;
  for (std::size_t i = 0; i < 60; ++i) {
    if (i % 4 != 0 && i != 17) unlabeled.push_back(i);
  }
  const auto ex = strategy1_expand(normals, unlabeled, rows, Metric::kNm1, 80.0);
  const auto expect = union_oracle(normals, unlabeled, rows, 80.0);
  EXPECT_EQ(ex.rows, std::vector<std::size_t>(expect.begin(), expect.end()));
  ASSERT_EQ(ex.thresholds.size(), 3u);
  EXPECT_EQ(ex.thresholds[1].anchor, 17u);
  for (auto r : ex.rows) {
    EXPECT_TRUE(std::binary_search(unlabeled.begin(), unlabeled.end(), r));
  }
  EXPECT_TRUE(strategy1_expand({}, unlabeled, rows, Metric::kNm1, 80.0)
                  .rows.empty());
}

TEST(Strategy2, PriorityOrderMatchesOracle) {
  const auto rows = random_rows(50, 20, 8);
  Rng rng(2);
  std::vector<double> scores(50);
  for (auto& s : scores) s = rng.uniform();
  const std::vector<std::size_t> anomalies{9, 2, 33};
  std::vector<std::size_t> unlabeled;
  for (std::size_t i = 0; i < 50; ++i) {
    if (i != 9 && i != 2 && i != 33 && i % 5 != 0) unlabeled.push_back(i);
  }
  const auto pr = strategy2_prioritize(anomalies, unlabeled, rows,
                                       Metric::kNm1, 80.0, scores);
  const auto sim = union_oracle(anomalies, unlabeled, rows, 80.0);
  EXPECT_EQ(pr.similar, std::vector<std::size_t>(sim.begin(), sim.end()));

  auto desc = [&](std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end(),
              [&](auto a, auto b) { return scores[a] > scores[b]; });
    return v;
  };
  auto expect = desc(anomalies);
  for (auto r : desc({sim.begin(), sim.end()})) expect.push_back(r);
  EXPECT_EQ(pr.priority, expect);
}

TEST(BuildRanking, PriorityThenScore) {
  const std::vector<double> scores{0.1, 0.9, 0.5, 0.9, 0.0};
  EXPECT_EQ(build_ranking(scores, {}),
            (std::vector<std::size_t>{1, 3, 2, 0, 4}));
  const std::vector<std::size_t> prio{4, 0, 4};
  EXPECT_EQ(build_ranking(scores, prio),
            (std::vector<std::size_t>{4, 0, 1, 3, 2}));
  const std::vector<std::size_t> bad{7};
  EXPECT_THROW(build_ranking(scores, bad), std::out_of_range);
}

TEST(SessionConfig, Validation) {
  SessionConfig c;
  EXPECT_NO_THROW(c.validate());
  c.budget = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SessionConfig{};
  c.iterations = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SessionConfig{};
  c.error_percentile = 100.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(parse_strategy("hybrid"), Strategy::kHybrid);
  EXPECT_THROW(parse_strategy("s3"), ConfigError);
}

TEST(SimulatedOracle, CachesAndCounts) {
  const LabelMap truth({Label::kNormal, Label::kAnomaly});
  SimulatedOracle o(truth);
  EXPECT_EQ(o.label(1), Label::kAnomaly);
  EXPECT_EQ(o.label(1), Label::kAnomaly);
  EXPECT_EQ(o.calls(), 2u);
}

struct Fixture {
  SyntheticData syn;
  Sda2eConfig model;
  Fixture() {
    SyntheticSpec spec;
    spec.n = 120;
    spec.d = 16;
    spec.anomaly_fraction = 0.05;
    spec.normal_clusters = 3;
    spec.seed = 5;
    syn = generate_synthetic(spec);
    model.epochs = 3;
    model.batch_size = 16;
  }
  SessionConfig session(Strategy s, std::size_t t) const {
    SessionConfig c;
    c.strategy = s;
    c.iterations = t;
    c.budget = 4;
    c.cold_start_fraction = 0.5;
    return c;
  }
};

TEST(Session, PassiveSingleIteration) {
  Fixture f;
  ActiveSession s(f.syn.dataset, &f.syn.labels, f.session(Strategy::kPassive, 1),
                  f.model);
  SimulatedOracle o(f.syn.labels);
  run_to_completion(s, o);
  EXPECT_EQ(s.phase(), Phase::kComplete);
  ASSERT_EQ(s.records().size(), 1u);
  EXPECT_TRUE(s.records()[0].ndcg.has_value());
  EXPECT_EQ(s.records()[0].pool_size, 60u);
  EXPECT_EQ(o.calls(), s.oracle_calls());
}

TEST(Session, PassiveNeverRetrains) {
  Fixture f;
  ActiveSession s(f.syn.dataset, &f.syn.labels, f.session(Strategy::kPassive, 4),
                  f.model);
  std::vector<std::vector<double>> seen;
  s.set_iteration_hook([&](const ActiveSession& a, const IterationRecord&) {
    seen.push_back(a.scores());
  });
  SimulatedOracle o(f.syn.labels);
  run_to_completion(s, o);
  ASSERT_EQ(seen.size(), 4u);
  for (const auto& v : seen) EXPECT_EQ(v, seen[0]);
  for (std::size_t i = 1; i < s.records().size(); ++i) {
    EXPECT_FALSE(s.records()[i].retrained);
    EXPECT_TRUE(s.records()[i].priority.empty());
  }
}

TEST(Session, RankingsArePermutationsAndHybridPinsAnomalies) {
  Fixture f;
  ActiveSession s(f.syn.dataset, &f.syn.labels, f.session(Strategy::kHybrid, 3),
                  f.model);
  const std::size_t n = f.syn.dataset.size();
  s.set_iteration_hook([&](const ActiveSession& a, const IterationRecord& r) {
    auto sorted = a.ranking();
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    EXPECT_EQ(sorted, all);
    const auto& anom = a.sets().anomalies();
    for (std::size_t i = 0; i < anom.size(); ++i) {
      EXPECT_TRUE(std::find(anom.begin(), anom.end(), a.ranking()[i]) !=
                  anom.end());
    }
    EXPECT_LE(r.queried.size(), 4u);
    EXPECT_TRUE(r.ndcg && *r.ndcg >= 0.0 && *r.ndcg <= 1.0);
  });
  SimulatedOracle o(f.syn.labels);
  run_to_completion(s, o);
  EXPECT_EQ(s.records().size(), 3u);
}

TEST(Session, S1GrowsPoolWithNormalsOnly) {
  Fixture f;
  ActiveSession s(f.syn.dataset, &f.syn.labels, f.session(Strategy::kS1, 3),
                  f.model);
  SimulatedOracle o(f.syn.labels);
  run_to_completion(s, o);
  for (std::size_t i = 1; i < s.records().size(); ++i) {
    EXPECT_GE(s.records()[i].pool_size, s.records()[i - 1].pool_size);
    EXPECT_TRUE(s.records()[i].retrained);
  }
  for (auto r : s.sets().anomalies()) EXPECT_FALSE(s.sets().in_pool(r));
}

TEST(Session, AllNormalOracleIsAccepted) {
  Fixture f;
  ActiveSession s(f.syn.dataset, nullptr, f.session(Strategy::kHybrid, 2),
                  f.model);
  const LabelMap normals(
      std::vector<Label>(f.syn.dataset.size(), Label::kNormal));
  SimulatedOracle o(normals);
  run_to_completion(s, o);
  EXPECT_EQ(s.phase(), Phase::kComplete);
  EXPECT_TRUE(s.sets().anomalies().empty());
  EXPECT_FALSE(s.records()[0].ndcg.has_value());
}

TEST(Session, DeterministicForFixedSeed) {
  Fixture f;
  auto run = [&] {
    ActiveSession s(f.syn.dataset, &f.syn.labels,
                    f.session(Strategy::kHybrid, 3), f.model);
    SimulatedOracle o(f.syn.labels);
    run_to_completion(s, o);
    return s.records();
  };
  EXPECT_EQ(run(), run());
}

TEST(Session, PhaseAndSubmitErrors) {
  Fixture f;
  ActiveSession s(f.syn.dataset, &f.syn.labels, f.session(Strategy::kS2, 2),
                  f.model);
  EXPECT_THROW(s.submit(0, Label::kNormal), PhaseError);
  EXPECT_THROW(s.advance(), PhaseError);
  s.start();
  EXPECT_THROW(s.start(), PhaseError);
  ASSERT_FALSE(s.pending().empty());
  EXPECT_THROW(s.advance(), PhaseError);
  const auto row = s.pending()[0];
  std::size_t other = 0;
  while (std::find(s.issued().begin(), s.issued().end(), other) !=
         s.issued().end()) {
    ++other;
  }
  EXPECT_THROW(s.submit(other, Label::kNormal), std::invalid_argument);
  s.submit(row, Label::kNormal);
  EXPECT_THROW(s.submit(row, Label::kAnomaly), std::invalid_argument);
}

TEST(Session, RejectsBadInputs) {
  Fixture f;
  const LabelMap none(
      std::vector<Label>(f.syn.dataset.size(), Label::kNormal));
  EXPECT_THROW(ActiveSession(f.syn.dataset, &none,
                             f.session(Strategy::kS1, 2), f.model),
               UndefinedMetricError);
  Sda2eConfig wrong = f.model;
  wrong.d = 7;
  EXPECT_THROW(ActiveSession(f.syn.dataset, &f.syn.labels,
                             f.session(Strategy::kS1, 2), wrong),
               ConfigError);
}

TEST(Journal, ReplayReproducesSession) {
  Fixture f;
  std::string journal;
  ActiveSession a(f.syn.dataset, &f.syn.labels, f.session(Strategy::kHybrid, 3),
                  f.model);
  a.set_journal([&](std::string_view l) {
    journal.append(l);
    journal.push_back('\n');
  });
  SimulatedOracle o(f.syn.labels);
  run_to_completion(a, o);

  ActiveSession b(f.syn.dataset, &f.syn.labels, f.session(Strategy::kHybrid, 3),
                  f.model);
  replay_journal(b, journal);
  EXPECT_EQ(b.records(), a.records());
  EXPECT_EQ(b.phase(), Phase::kComplete);
  EXPECT_EQ(b.ranking(), a.ranking());
}

TEST(Journal, PartialReplayStopsAwaitingLabels) {
  Fixture f;
  std::string journal;
  ActiveSession a(f.syn.dataset, &f.syn.labels, f.session(Strategy::kS2, 3),
                  f.model);
  a.set_journal([&](std::string_view l) {
    journal.append(l);
    journal.push_back('\n');
  });
  a.start();
  const auto p = a.pending();
  a.submit(p[0], f.syn.labels.at(p[0]));

  ActiveSession b(f.syn.dataset, &f.syn.labels, f.session(Strategy::kS2, 3),
                  f.model);
  replay_journal(b, journal);
  EXPECT_EQ(b.phase(), Phase::kAwaitingLabels);
  EXPECT_EQ(b.pending(), a.pending());
}

TEST(Journal, TamperedJournalIsRejected) {
  Fixture f;
  std::string journal;
  ActiveSession a(f.syn.dataset, &f.syn.labels, f.session(Strategy::kS1, 2),
                  f.model);
  a.set_journal([&](std::string_view l) {
    journal.append(l);
    journal.push_back('\n');
  });
  SimulatedOracle o(f.syn.labels);
  run_to_completion(a, o);

  auto tampered = journal;
  const auto at = tampered.find("\"tau\":");
  ASSERT_NE(at, std::string::npos);
  tampered.insert(at + 6, "1");
  ActiveSession b(f.syn.dataset, &f.syn.labels, f.session(Strategy::kS1, 2),
                  f.model);
  EXPECT_THROW(replay_journal(b, tampered), DataError);

  ActiveSession c(f.syn.dataset, &f.syn.labels, f.session(Strategy::kS1, 2),
                  f.model);
  EXPECT_THROW(replay_journal(c, ""), DataError);
}

}  // namespace
}  // namespace sda2e

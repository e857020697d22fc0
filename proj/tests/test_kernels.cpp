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

#include "sda2e/kernels.hpp"

#include <omp.h>

#include <vector>

#include <gtest/gtest.h>

#include "sda2e/rng.hpp"

namespace sda2e {
namespace {

std::vector<BitVector> random_rows(std::size_t n, std::size_t d,
                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BitVector> rows;
  for (std::size_t i = 0; i < n; ++i) {
    BitVector v(d);
    for (std::size_t j = 0; j < d; ++j) v.set(j, rng.bernoulli(0.2));
    rows.push_back(v);
  }
  return rows;
}

class ThreadCount : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    saved_ = omp_get_max_threads();
    omp_set_num_threads(GetParam());
  }
  void TearDown() override { omp_set_num_threads(saved_); }
  int saved_ = 1;
};

TEST_P(ThreadCount, SimilarityScanMatchesSerial) {
  const auto rows = random_rows(997, 77, 3);
  std::vector<std::size_t> cands;
  for (std::size_t i = 0; i < rows.size(); i += 3) cands.push_back(i);
  for (Metric m : {Metric::kNm1, Metric::kJaccard, Metric::kDice,
                   Metric::kHamming, Metric::kCosine}) {
    std::vector<double> a(rows.size()), b(rows.size());
    kernels::similarity_scan_serial(rows[5], rows, {}, m, a);
    kernels::similarity_scan_omp(rows[5], rows, {}, m, b);
    EXPECT_EQ(a, b);
    std::vector<double> c(cands.size()), e(cands.size());
    kernels::similarity_scan_serial(rows[5], rows, cands, m, c);
    kernels::similarity_scan_omp(rows[5], rows, cands, m, e);
    EXPECT_EQ(c, e);
    for (std::size_t i = 0; i < cands.size(); ++i) {
      EXPECT_EQ(c[i], similarity(rows[5], rows[cands[i]], m));
    }
  }
}

TEST_P(ThreadCount, ScoringMatchesSerial) {
  Sda2eConfig c;
  c.d = 30;
  c.k = 4;
  c.seed = 2;
  const Sda2eModel model(c);
  const auto rows = random_rows(301, 30, 9);
  std::vector<double> a(rows.size()), b(rows.size());
  kernels::score_rows_serial(model, rows, a);
  kernels::score_rows_omp(model, rows, b);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < rows.size(); i += 50) {
    EXPECT_EQ(a[i], model.anomaly_score(rows[i].to_dense()));
  }
}

INSTANTIATE_TEST_SUITE_P(Threads, ThreadCount, ::testing::Values(1, 2, 4, 7));

}  // namespace
}  // namespace sda2e

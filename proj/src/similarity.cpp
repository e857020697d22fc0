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

#include "sda2e/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sda2e/error.hpp"
#include "sda2e/kernels.hpp"

namespace sda2e {

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kNm1:
      return "nm1";
    case Metric::kJaccard:
      return "jaccard";
    case Metric::kDice:
      return "dice";
    case Metric::kHamming:
      return "hamming";
    case Metric::kCosine:
      return "cosine";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : {Metric::kNm1, Metric::kJaccard, Metric::kDice,
                   Metric::kHamming, Metric::kCosine}) {
    if (metric_name(m) == name) return m;
  }
  throw ConfigError("unknown metric '" + std::string(name) +
                    "' (expected nm1|jaccard|dice|hamming|cosine)");
}

double sim_nm1(const BitVector& a, const BitVector& b) {
  return similarity(a, b, Metric::kNm1);
}

double similarity(const BitVector& a, const BitVector& b, Metric metric) {
  if (metric == Metric::kHamming) {
    const std::size_t match = matching_count(a, b);
    return a.width() == 0 ? 1.0
                          : static_cast<double>(match) /
                                static_cast<double>(a.width());
  }
  const std::size_t inter = intersection_count(a, b);
  const std::size_t na = a.popcount();
  const std::size_t nb = b.popcount();
  if (na == 0 && nb == 0) return 1.0;
  if (na == 0 || nb == 0) return 0.0;
  const auto i = static_cast<double>(inter);
  switch (metric) {
    case Metric::kNm1:
      return i / static_cast<double>(std::max(na, nb));
    case Metric::kJaccard:
      return i / static_cast<double>(na + nb - inter);
    case Metric::kDice:
      return 2.0 * i / static_cast<double>(na + nb);
    case Metric::kCosine:
      return i / std::sqrt(static_cast<double>(na) * static_cast<double>(nb));
    case Metric::kHamming:
      break;
  }
  return 0.0;
}

double percentile_threshold(std::span<const double> values, double p) {
  if (values.empty()) {
    throw std::invalid_argument("percentile of an empty sequence");
  }
  if (!(p >= 0.0 && p <= 100.0)) {
    throw std::invalid_argument("percentile must lie in [0, 100]");
  }
  const auto n = static_cast<double>(values.size());
  // p * n first so integral percentiles of integral sizes stay exact.
  const double rank = std::ceil(p * n / 100.0);
  const std::size_t idx = static_cast<std::size_t>(
      std::clamp(rank - 1.0, 0.0, n - 1.0));
  std::vector<double> copy(values.begin(), values.end());
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(idx),
                   copy.end());
  return copy[idx];
}

std::vector<ScoredIndex> similar_above(const BitVector& query,
                                       std::span<const BitVector> rows,
                                       std::span<const std::size_t> candidates,
                                       Metric metric, double threshold) {
  if (candidates.empty()) return {};
  std::vector<double> sims(candidates.size());
  kernels::similarity_scan_omp(query, rows, candidates, metric, sims);
  std::vector<ScoredIndex> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (sims[i] >= threshold) out.push_back({candidates[i], sims[i]});
  }
  std::sort(out.begin(), out.end(),
            [](const ScoredIndex& a, const ScoredIndex& b) {
              return a.index < b.index;
            });
  return out;
}

std::vector<ScoredIndex> similar_above(const BitVector& query,
                                       std::span<const BitVector> rows,
                                       Metric metric, double threshold) {
  std::vector<double> sims(rows.size());
  kernels::similarity_scan_omp(query, rows, {}, metric, sims);
  std::vector<ScoredIndex> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (sims[i] >= threshold) out.push_back({i, sims[i]});
  }
  return out;
}

namespace {

std::vector<ScoredIndex> take_top(std::vector<ScoredIndex> all,
                                  std::size_t k) {
  const auto better = [](const ScoredIndex& a, const ScoredIndex& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
  };
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                    all.end(), better);
  all.resize(k);
  return all;
}

}  // namespace

std::vector<ScoredIndex> topk_similar(const BitVector& query,
                                      std::span<const BitVector> rows,
                                      Metric metric, std::size_t k) {
  std::vector<double> sims(rows.size());
  kernels::similarity_scan_omp(query, rows, {}, metric, sims);
  std::vector<ScoredIndex> all(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) all[i] = {i, sims[i]};
  return take_top(std::move(all), k);
}

std::vector<ScoredIndex> topk_similar(const BitVector& query,
                                      std::span<const BitVector> rows,
                                      std::span<const std::size_t> candidates,
                                      Metric metric, std::size_t k) {
  if (candidates.empty()) return {};
  std::vector<double> sims(candidates.size());
  kernels::similarity_scan_omp(query, rows, candidates, metric, sims);
  std::vector<ScoredIndex> all(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    all[i] = {candidates[i], sims[i]};
  }
  return take_top(std::move(all), k);
}

}  // namespace sda2e

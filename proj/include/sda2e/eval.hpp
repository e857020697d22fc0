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

#ifndef SDA2E_EVAL_HPP_
#define SDA2E_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sda2e {

// sum_i (2^r_i - 1) / log2(i + 1), positions 1-based. r_i must be 0 or 1.
double dcg(std::span<const std::uint8_t> relevance);

// DCG of the ranking over IDCG of the ideal ordering, both truncated at
// `cutoff` when given. `relevance` is indexed by row; `ranking` lists row
// indices. Throws UndefinedMetricError when there is no relevant row.
double ndcg(std::span<const std::size_t> ranking,
            std::span<const std::uint8_t> relevance,
            std::optional<std::size_t> cutoff = std::nullopt);

// Lower-middle element for even lengths.
double lower_median(std::span<const double> values);
double mean(std::span<const double> values);

struct SummaryTriplet {
  double max_max = 0.0;
  double max_mean = 0.0;
  double max_median = 0.0;
  friend bool operator==(const SummaryTriplet&,
                         const SummaryTriplet&) = default;
};

// Per-series max/mean/median, then the max of each across series.
SummaryTriplet summarize(const std::vector<std::vector<double>>& series);

// table[m][j] = score of method m on dataset j, higher is better. Returns the
// mean rank per method (1 = best), ties get the mean of their ranks.
std::vector<double> average_ranks(
    const std::vector<std::vector<double>>& table);

}  // namespace sda2e

#endif  // SDA2E_EVAL_HPP_

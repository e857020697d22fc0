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

#ifndef SDA2E_SIMILARITY_HPP_
#define SDA2E_SIMILARITY_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sda2e/bitvector.hpp"

namespace sda2e {

enum class Metric { kNm1, kJaccard, kDice, kHamming, kCosine };

std::string_view metric_name(Metric m);
// Accepts nm1 | jaccard | dice | hamming | cosine. Throws ConfigError.
Metric parse_metric(std::string_view name);

// |A ∩ B| / max(|A|, |B|). Two empty vectors score 1, one empty vector 0.
double sim_nm1(const BitVector& a, const BitVector& b);

// Any metric, all in [0, 1] and symmetric. Empty-vector conventions:
// two empty vectors are identical (1.0); Jaccard/Dice/Cosine against a single
// empty vector are 0. Hamming counts matching positions over the width.
double similarity(const BitVector& a, const BitVector& b, Metric metric);

// Nearest-rank percentile: the element at ceil(p/100 * n) - 1 of the sorted
// values, clamped to [0, n-1]. Always returns one of the inputs. Throws
// std::invalid_argument on empty input or p outside [0, 100].
double percentile_threshold(std::span<const double> values, double p);

struct ScoredIndex {
  std::size_t index = 0;
  double score = 0.0;
  friend bool operator==(const ScoredIndex&, const ScoredIndex&) = default;
};

// Rows with similarity >= threshold (inclusive), ascending by index. The
// second overload only considers the listed candidate rows.
std::vector<ScoredIndex> similar_above(const BitVector& query,
                                       std::span<const BitVector> rows,
                                       Metric metric, double threshold);
std::vector<ScoredIndex> similar_above(const BitVector& query,
                                       std::span<const BitVector> rows,
                                       std::span<const std::size_t> candidates,
                                       Metric metric, double threshold);

// The k most similar rows by descending similarity, ties by ascending index.
std::vector<ScoredIndex> topk_similar(const BitVector& query,
                                      std::span<const BitVector> rows,
                                      Metric metric, std::size_t k);
std::vector<ScoredIndex> topk_similar(const BitVector& query,
                                      std::span<const BitVector> rows,
                                      std::span<const std::size_t> candidates,
                                      Metric metric, std::size_t k);

}  // namespace sda2e

#endif  // SDA2E_SIMILARITY_HPP_

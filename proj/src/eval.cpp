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

#include "sda2e/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sda2e/error.hpp"

namespace sda2e {

double dcg(std::span<const std::uint8_t> relevance) {
  double total = 0.0;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    const auto r = relevance[i];
    if (r > 1) throw std::invalid_argument("relevance must be 0 or 1");
    const double gain = std::exp2(static_cast<double>(r)) - 1.0;
    total += gain / std::log2(static_cast<double>(i + 2));
  }
  return total;
}

double ndcg(std::span<const std::size_t> ranking,
            std::span<const std::uint8_t> relevance,
            std::optional<std::size_t> cutoff) {
  std::size_t relevant = 0;
  for (auto r : relevance) relevant += r != 0 ? 1 : 0;
  if (relevant == 0) {
    throw UndefinedMetricError("nDCG is undefined without a relevant row");
  }
  const std::size_t n =
      cutoff ? std::min(*cutoff, ranking.size()) : ranking.size();
  if (n == 0) throw UndefinedMetricError("nDCG cutoff of 0");
  std::vector<std::uint8_t> ordered(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (ranking[i] >= relevance.size()) {
      throw std::out_of_range("ranking entry " + std::to_string(ranking[i]) +
                              " outside relevance table");
    }
    ordered[i] = relevance[ranking[i]];
  }
  std::vector<std::uint8_t> ideal(std::min(n, relevance.size()), 0);
  std::fill_n(ideal.begin(), std::min(relevant, ideal.size()), 1);
  return dcg(ordered) / dcg(ideal);
}

double lower_median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty series");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  return v[mid];
}

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean of empty series");
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

SummaryTriplet summarize(const std::vector<std::vector<double>>& series) {
  if (series.empty()) throw std::invalid_argument("no series to summarize");
  SummaryTriplet out;
  bool first = true;
  for (const auto& s : series) {
    if (s.empty()) throw std::invalid_argument("empty series");
    const double mx = *std::max_element(s.begin(), s.end());
    const double mn = mean(s);
    const double md = lower_median(s);
    if (first) {
      out = {mx, mn, md};
      first = false;
    } else {
      out.max_max = std::max(out.max_max, mx);
      out.max_mean = std::max(out.max_mean, mn);
      out.max_median = std::max(out.max_median, md);
    }
  }
  return out;
}

std::vector<double> average_ranks(
    const std::vector<std::vector<double>>& table) {
  if (table.empty()) throw std::invalid_argument("empty score table");
  const std::size_t datasets = table.front().size();
  if (datasets == 0) throw std::invalid_argument("score table has no columns");
  for (const auto& row : table) {
    if (row.size() != datasets) {
      throw std::invalid_argument("score table has missing cells");
    }
  }
  const std::size_t m = table.size();
  std::vector<double> sums(m, 0.0);
  std::vector<std::size_t> order(m);
  for (std::size_t j = 0; j < datasets; ++j) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return table[a][j] > table[b][j];
                     });
    std::size_t i = 0;
    while (i < m) {
      std::size_t k = i;
      while (k + 1 < m && table[order[k + 1]][j] == table[order[i]][j]) ++k;
      // positions i..k (0-based) share ranks i+1..k+1
      const double rank = (static_cast<double>(i + 1) +
                           static_cast<double>(k + 1)) / 2.0;
      for (std::size_t t = i; t <= k; ++t) sums[order[t]] += rank;
      i = k + 1;
    }
  }
  for (double& s : sums) s /= static_cast<double>(datasets);
  return sums;
}

}  // namespace sda2e

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

#include <string>
#include <vector>

#include "sda2e/error.hpp"

namespace sda2e::kernels {
namespace {

std::size_t scan_size(std::span<const BitVector> rows,
                      std::span<const std::size_t> candidates,
                      std::span<double> out) {
  const std::size_t n = candidates.empty() ? rows.size() : candidates.size();
  if (out.size() != n) {
    throw DimensionError("similarity scan: output has " +
                         std::to_string(out.size()) + " slots for " +
                         std::to_string(n) + " rows");
  }
  return n;
}

}  // namespace

void similarity_scan_serial(const BitVector& query,
                            std::span<const BitVector> rows,
                            std::span<const std::size_t> candidates,
                            Metric metric, std::span<double> out) {
  const std::size_t n = scan_size(rows, candidates, out);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = candidates.empty() ? i : candidates[i];
    out[i] = similarity(query, rows[r], metric);
  }
}

void similarity_scan_omp(const BitVector& query,
                         std::span<const BitVector> rows,
                         std::span<const std::size_t> candidates, Metric metric,
                         std::span<double> out) {
  const std::size_t n = scan_size(rows, candidates, out);
  if (!rows.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = candidates.empty() ? i : candidates[i];
      if (rows[r].width() != query.width()) {
        throw DimensionError("similarity scan: width mismatch at row " +
                             std::to_string(r));
      }
    }
  }
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const std::size_t r = candidates.empty() ? static_cast<std::size_t>(i)
                                             : candidates[i];
    out[i] = similarity(query, rows[r], metric);
  }
}

void score_rows_serial(const Sda2eModel& model,
                       std::span<const BitVector> rows, std::span<double> out) {
  if (out.size() != rows.size()) throw DimensionError("score: output size");
  ForwardTrace scratch;
  std::vector<double> x(model.input_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].to_dense(x);
    out[i] = model.anomaly_score(x, scratch);
  }
}

void score_rows_omp(const Sda2eModel& model, std::span<const BitVector> rows,
                    std::span<double> out) {
  if (out.size() != rows.size()) throw DimensionError("score: output size");
  for (const auto& row : rows) {
    if (row.width() != model.input_dim()) {
      throw DimensionError("score: row width " + std::to_string(row.width()) +
                           " != d " + std::to_string(model.input_dim()));
    }
  }
  const auto count = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel
  {
    ForwardTrace scratch;
    std::vector<double> x(model.input_dim());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      rows[i].to_dense(x);
      out[i] = model.anomaly_score(x, scratch);
    }
  }
}

}  // namespace sda2e::kernels

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

#ifndef SDA2E_KERNELS_HPP_
#define SDA2E_KERNELS_HPP_

// Row-parallel kernels. Each has a serial reference kept for testing and
// benchmarking; both variants produce bit-identical results because every
// output element is computed independently by the same code.

#include <cstddef>
#include <span>

#include "sda2e/bitvector.hpp"
#include "sda2e/model.hpp"
#include "sda2e/similarity.hpp"

namespace sda2e::kernels {

// out[i] = similarity(query, rows[candidates[i]]), or over all rows when
// `candidates` is empty (then out.size() == rows.size()).
void similarity_scan_serial(const BitVector& query,
                            std::span<const BitVector> rows,
                            std::span<const std::size_t> candidates,
                            Metric metric, std::span<double> out);
void similarity_scan_omp(const BitVector& query,
                         std::span<const BitVector> rows,
                         std::span<const std::size_t> candidates, Metric metric,
                         std::span<double> out);

// out[i] = model.anomaly_score(rows[i]).
void score_rows_serial(const Sda2eModel& model,
                       std::span<const BitVector> rows, std::span<double> out);
void score_rows_omp(const Sda2eModel& model, std::span<const BitVector> rows,
                    std::span<double> out);

}  // namespace sda2e::kernels

#endif  // SDA2E_KERNELS_HPP_

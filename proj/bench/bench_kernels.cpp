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

// Serial reference vs OpenMP kernels.
//   sda2e_bench --benchmark_filter=Scan

#include <vector>

#include <benchmark/benchmark.h>

#include "sda2e/data.hpp"
#include "sda2e/kernels.hpp"
#include "sda2e/model.hpp"

namespace {

using namespace sda2e;

const SyntheticData& dataset(std::size_t n, std::size_t d) {
  static std::vector<std::pair<std::pair<std::size_t, std::size_t>,
                               SyntheticData>> cache;
  for (const auto& [key, data] : cache) {
    if (key.first == n && key.second == d) return data;
  }
  SyntheticSpec spec;
  spec.n = n;
  spec.d = d;
  cache.emplace_back(std::make_pair(n, d), generate_synthetic(spec));
  return cache.back().second;
}

template <bool kParallel>
void BM_SimilarityScan(benchmark::State& state) {
  const auto& syn = dataset(static_cast<std::size_t>(state.range(0)), 512);
  const auto rows = syn.dataset.rows();
  std::vector<double> out(rows.size());
  for (auto _ : state) {
    if constexpr (kParallel) {
      kernels::similarity_scan_omp(rows[0], rows, {}, Metric::kNm1, out);
    } else {
      kernels::similarity_scan_serial(rows[0], rows, {}, Metric::kNm1, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(rows.size()));
}

template <bool kParallel>
void BM_ScoreRows(benchmark::State& state) {
  const auto& syn = dataset(static_cast<std::size_t>(state.range(0)), 64);
  Sda2eConfig cfg;
  cfg.d = 64;
  const Sda2eModel model(cfg.resolved());
  const auto rows = syn.dataset.rows();
  std::vector<double> out(rows.size());
  for (auto _ : state) {
    if constexpr (kParallel) {
      kernels::score_rows_omp(model, rows, out);
    } else {
      kernels::score_rows_serial(model, rows, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(rows.size()));
}

BENCHMARK(BM_SimilarityScan<false>)->Name("SimilarityScan/serial")->Arg(2000)->Arg(20000);
BENCHMARK(BM_SimilarityScan<true>)->Name("SimilarityScan/omp")->Arg(2000)->Arg(20000);
BENCHMARK(BM_ScoreRows<false>)->Name("ScoreRows/serial")->Arg(2000)->Arg(20000);
BENCHMARK(BM_ScoreRows<true>)->Name("ScoreRows/omp")->Arg(2000)->Arg(20000);

}  // namespace

BENCHMARK_MAIN();

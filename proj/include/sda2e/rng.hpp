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

#ifndef SDA2E_RNG_HPP_
#define SDA2E_RNG_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace sda2e {

// SplitMix64 step. Used for seeding and for deriving child seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// Derives an independent child seed from (parent, stream tag, index). The
// derivation is a fixed function of its inputs on every platform.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view stream,
                          std::uint64_t index = 0);

// xoshiro256** 1.0 (Blackman & Vigna), seeded through SplitMix64.
//
// All sampling helpers below are defined in terms of next() only, so any
// sequence of draws is bit-identical across compilers and standard libraries
// (unlike the <random> distributions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, bound). bound must be > 0. Lemire's method with
  // rejection, so the result is unbiased.
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double p);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_;
};

// FNV-1a 64-bit hash; used for dataset and ranking digests.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace sda2e

#endif  // SDA2E_RNG_HPP_

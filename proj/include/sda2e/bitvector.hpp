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

#ifndef SDA2E_BITVECTOR_HPP_
#define SDA2E_BITVECTOR_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sda2e {

// Packed binary feature vector with a cached population count. Bits past
// width() in the last word are always zero.
class BitVector {
 public:
  using Word = std::uint64_t;
  static constexpr std::size_t kWordBits = 64;

  BitVector() = default;
  explicit BitVector(std::size_t width);
  static BitVector from_indices(std::size_t width,
                                std::span<const std::size_t> active);
  static BitVector from_dense(std::span<const double> values);

  std::size_t width() const { return width_; }
  std::size_t popcount() const { return popcount_; }
  std::span<const Word> words() const { return words_; }

  bool test(std::size_t i) const {
    return (words_[i / kWordBits] >> (i % kWordBits)) & 1U;
  }
  void set(std::size_t i, bool value = true);

  std::vector<std::size_t> active_indices() const;
  // 0.0 / 1.0 per feature.
  void to_dense(std::span<double> out) const;
  std::vector<double> to_dense() const;

  // Recounts from the words; used by tests to validate the cache.
  std::size_t recount() const;

  friend bool operator==(const BitVector& a, const BitVector& b) {
    return a.width_ == b.width_ && a.words_ == b.words_;
  }

 private:
  std::size_t width_ = 0;
  std::size_t popcount_ = 0;
  std::vector<Word> words_;
};

// |a AND b|. Widths must match.
std::size_t intersection_count(const BitVector& a, const BitVector& b);
// Positions where a and b agree, zeros included.
std::size_t matching_count(const BitVector& a, const BitVector& b);

}  // namespace sda2e

#endif  // SDA2E_BITVECTOR_HPP_

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

#include "sda2e/bitvector.hpp"

#include <bit>
#include <string>

#include "sda2e/error.hpp"

namespace sda2e {
namespace {

void check_widths(const BitVector& a, const BitVector& b) {
  if (a.width() != b.width()) {
    throw DimensionError("bit vector widths differ: " +
                         std::to_string(a.width()) + " vs " +
                         std::to_string(b.width()));
  }
}

}  // namespace

BitVector::BitVector(std::size_t width)
    : width_(width), words_((width + kWordBits - 1) / kWordBits, 0) {}

BitVector BitVector::from_indices(std::size_t width,
                                  std::span<const std::size_t> active) {
  BitVector v(width);
  for (std::size_t i : active) {
    if (i >= width) {
      throw DimensionError("bit index " + std::to_string(i) +
                           " out of width " + std::to_string(width));
    }
    v.set(i);
  }
  return v;
}

BitVector BitVector::from_dense(std::span<const double> values) {
  BitVector v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0) v.set(i);
  }
  return v;
}

void BitVector::set(std::size_t i, bool value) {
  const Word mask = Word{1} << (i % kWordBits);
  Word& w = words_[i / kWordBits];
  const bool was = (w & mask) != 0;
  if (was == value) return;
  if (value) {
    w |= mask;
    ++popcount_;
  } else {
    w &= ~mask;
    --popcount_;
  }
}

std::vector<std::size_t> BitVector::active_indices() const {
  std::vector<std::size_t> out;
  out.reserve(popcount_);
  for (std::size_t w = 0; w < words_.size(); ++w) {
    Word bits = words_[w];
    while (bits != 0) {
      out.push_back(w * kWordBits + std::countr_zero(bits));
      bits &= bits - 1;
    }
  }
  return out;
}

void BitVector::to_dense(std::span<double> out) const {
  if (out.size() != width_) throw DimensionError("to_dense: width mismatch");
  for (std::size_t i = 0; i < width_; ++i) out[i] = test(i) ? 1.0 : 0.0;
}

std::vector<double> BitVector::to_dense() const {
  std::vector<double> out(width_);
  to_dense(out);
  return out;
}

std::size_t BitVector::recount() const {
  std::size_t n = 0;
  for (Word w : words_) n += std::popcount(w);
  return n;
}

std::size_t intersection_count(const BitVector& a, const BitVector& b) {
  check_widths(a, b);
  auto wa = a.words();
  auto wb = b.words();
  std::size_t n = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) n += std::popcount(wa[i] & wb[i]);
  return n;
}

std::size_t matching_count(const BitVector& a, const BitVector& b) {
  check_widths(a, b);
  auto wa = a.words();
  auto wb = b.words();
  std::size_t differing = 0;
  // Padding bits are zero in both, so XOR never counts them.
  for (std::size_t i = 0; i < wa.size(); ++i) {
    differing += std::popcount(wa[i] ^ wb[i]);
  }
  return a.width() - differing;
}

}  // namespace sda2e

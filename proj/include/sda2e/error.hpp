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

#ifndef SDA2E_ERROR_HPP_
#define SDA2E_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sda2e {

// Shape disagreement between operands (matrix/vector/bit widths).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A configuration value violates a documented invariant.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (files, labels, ids).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite value or could not proceed.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric is undefined for the given input (e.g. nDCG with no anomalies).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An operation was requested in a session phase that does not permit it.
class PhaseError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sda2e

#endif  // SDA2E_ERROR_HPP_

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

#ifndef SDA2E_SCORING_HPP_
#define SDA2E_SCORING_HPP_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sda2e/bitvector.hpp"
#include "sda2e/model.hpp"

namespace sda2e {

// anomaly_score of every row, in row order. Rows are scored in parallel;
// the result does not depend on the thread count.
std::vector<double> score_all(const Sda2eModel& model,
                              std::span<const BitVector> rows);

// Text container: a version line, the config as key=value lines, then each
// parameter tensor with its values in hexadecimal floating point, so a
// reload is bit-exact.
void write_checkpoint(Sda2eModel& model, std::ostream& out);
Sda2eModel read_checkpoint(std::istream& in,
                           const std::string& source = "<stream>");
void save_checkpoint(Sda2eModel& model, const std::string& path);
Sda2eModel load_checkpoint(const std::string& path);

}  // namespace sda2e

#endif  // SDA2E_SCORING_HPP_

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

#ifndef SDA2E_DATA_HPP_
#define SDA2E_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sda2e/bitvector.hpp"
#include "sda2e/numerics.hpp"

namespace sda2e {

enum class Label { kNormal, kAnomaly };

std::string_view label_name(Label l);
// "normal" | "anomaly"; throws DataError otherwise.
Label parse_label(std::string_view text);

// Boolean process x feature table with stable, unique row ids.
class BinaryDataset {
 public:
  BinaryDataset() = default;
  explicit BinaryDataset(std::size_t width,
                         std::vector<std::string> feature_names = {});

  // Throws DataError on a duplicate/empty id or a width mismatch.
  void add_row(std::string id, BitVector row);

  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  std::size_t width() const { return width_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_.at(i); }
  std::span<const BitVector> rows() const { return rows_; }
  const BitVector& row(std::size_t i) const { return rows_.at(i); }
  const std::vector<std::string>& feature_names() const { return names_; }
  std::optional<std::size_t> find(std::string_view id) const;

  // Dense 0/1 matrix of the selected rows (all rows when indices is empty).
  Matrix dense(std::span<const std::size_t> indices) const;
  Matrix dense() const;

  // FNV-1a 64 of the CSV serialization.
  std::uint64_t checksum() const;

 private:
  std::size_t width_ = 0;
  std::vector<std::string> names_;
  std::vector<std::string> ids_;
  std::vector<BitVector> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Ground-truth labels aligned with a dataset's row order.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<Label> labels) : labels_(std::move(labels)) {}

  std::size_t size() const { return labels_.size(); }
  Label at(std::size_t i) const { return labels_.at(i); }
  const std::vector<Label>& labels() const { return labels_; }
  std::size_t anomaly_count() const;
  double anomaly_fraction() const;
  // 1 for anomalies, 0 otherwise.
  std::vector<std::uint8_t> relevance() const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::vector<Label> labels_;
};

// CSV: header `id,<f1>,...,<fd>`, one row per line, cells exactly 0 or 1.
BinaryDataset parse_dataset_csv(std::istream& in,
                                std::string_view source = "<stream>");
BinaryDataset load_csv(const std::string& path);
void write_dataset_csv(const BinaryDataset& data, std::ostream& out);
void save_csv(const BinaryDataset& data, const std::string& path);

// Label CSV: header `id,label`, label in {normal, anomaly}. Every dataset id
// must be covered unless `missing_as_normal` is set.
LabelMap parse_labels_csv(std::istream& in, const BinaryDataset& data,
                          bool missing_as_normal = false,
                          std::string_view source = "<stream>");
LabelMap load_labels(const std::string& path, const BinaryDataset& data,
                     bool missing_as_normal = false);
void write_labels_csv(const BinaryDataset& data, const LabelMap& labels,
                      std::ostream& out);
void save_labels(const BinaryDataset& data, const LabelMap& labels,
                 const std::string& path);

enum class AnomalyMode { kClusterShifted, kUniformRare };

// Synthetic imbalanced binary data. Normal rows are noisy copies of cluster
// prototypes with Zipf-distributed cluster sizes; anomalies are noisy copies
// of shifted prototypes (a normal prototype with shift_fraction * d bits
// flipped) or independent random rows.
struct SyntheticSpec {
  std::size_t n = 2000;
  std::size_t d = 64;
  double anomaly_fraction = 0.01;
  std::size_t normal_clusters = 12;
  double density = 0.25;
  double noise = 0.05;
  AnomalyMode mode = AnomalyMode::kClusterShifted;
  std::size_t anomaly_groups = 2;
  double shift_fraction = 0.2;
  std::uint64_t seed = 42;

  std::size_t anomaly_count() const;
  // Throws ConfigError if the settings cannot be realized.
  void validate() const;
};

// n = 2000, d = 64, 1% anomalies, seed 42.
SyntheticSpec canonical_synthetic_spec();

struct SyntheticData {
  BinaryDataset dataset;
  LabelMap labels;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

struct Split {
  std::vector<std::size_t> first;   // round(fraction * n) rows
  std::vector<std::size_t> second;  // the rest
};

// Seeded shuffle partition; `stratified` splits normals and anomalies
// separately (requires labels). Throws DataError if a part would be empty.
Split split(const BinaryDataset& data, const LabelMap* labels, double fraction,
            std::uint64_t seed, bool stratified = false);

struct DatasetSummary {
  std::size_t rows = 0;
  std::size_t features = 0;
  std::size_t anomalies = 0;
  double anomaly_percent = 0.0;
  // "rows / features / anomalies / P.PP%"
  std::string format() const;
};

DatasetSummary summarize_dataset(const BinaryDataset& data,
                                 const LabelMap* labels);

}  // namespace sda2e

#endif  // SDA2E_DATA_HPP_

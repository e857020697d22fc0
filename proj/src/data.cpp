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

#include "sda2e/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sda2e/error.hpp"
#include "sda2e/rng.hpp"

namespace sda2e {
namespace {

[[noreturn]] void fail_at(std::string_view source, std::size_t line,
                          std::size_t column, const std::string& what) {
  std::ostringstream msg;
  msg << source << ":" << line;
  if (column > 0) msg << ":" << column;
  msg << ": " << what;
  throw DataError(msg.str());
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

// Write to a sibling temp file then rename, so a failed write never leaves a
// truncated output behind.
template <typename Fn>
void write_atomically(const std::string& path, Fn&& fn) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    fn(out);
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw DataError("write failed for " + path);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw DataError("cannot move output into place: " + path);
  }
}

}  // namespace

std::string_view label_name(Label l) {
  return l == Label::kAnomaly ? "anomaly" : "normal";
}

Label parse_label(std::string_view text) {
  if (text == "normal") return Label::kNormal;
  if (text == "anomaly") return Label::kAnomaly;
  throw DataError("label must be normal or anomaly, got '" +
                  std::string(text) + "'");
}

BinaryDataset::BinaryDataset(std::size_t width,
                             std::vector<std::string> feature_names)
    : width_(width), names_(std::move(feature_names)) {
  if (names_.empty()) {
    names_.reserve(width);
    for (std::size_t j = 0; j < width; ++j) {
      names_.push_back("f" + std::to_string(j + 1));
    }
  }
  if (names_.size() != width) {
    throw DataError("feature name count " + std::to_string(names_.size()) +
                    " does not match width " + std::to_string(width));
  }
}

void BinaryDataset::add_row(std::string id, BitVector row) {
  if (id.empty()) throw DataError("empty row id");
  if (row.width() != width_) {
    throw DataError("row '" + id + "' has width " +
                    std::to_string(row.width()) + ", expected " +
                    std::to_string(width_));
  }
  auto [it, inserted] = index_.emplace(id, rows_.size());
  if (!inserted) throw DataError("duplicate row id '" + id + "'");
  ids_.push_back(std::move(id));
  rows_.push_back(std::move(row));
}

std::optional<std::size_t> BinaryDataset::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Matrix BinaryDataset::dense(std::span<const std::size_t> indices) const {
  Matrix m(indices.size(), width_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    rows_.at(indices[r]).to_dense(m.row(r));
  }
  return m;
}

Matrix BinaryDataset::dense() const {
  Matrix m(rows_.size(), width_);
  for (std::size_t r = 0; r < rows_.size(); ++r) rows_[r].to_dense(m.row(r));
  return m;
}

std::uint64_t BinaryDataset::checksum() const {
  std::ostringstream out;
  write_dataset_csv(*this, out);
  return fnv1a64(out.str());
}

std::size_t LabelMap::anomaly_count() const {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), Label::kAnomaly));
}

double LabelMap::anomaly_fraction() const {
  if (labels_.empty()) return 0.0;
  return static_cast<double>(anomaly_count()) /
         static_cast<double>(labels_.size());
}

std::vector<std::uint8_t> LabelMap::relevance() const {
  std::vector<std::uint8_t> out(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    out[i] = labels_[i] == Label::kAnomaly ? 1 : 0;
  }
  return out;
}

BinaryDataset parse_dataset_csv(std::istream& in, std::string_view source) {
  std::string line;
  if (!read_line(in, line)) fail_at(source, 1, 0, "missing header");
  const auto header = split_fields(line);
  if (header.front() != "id") fail_at(source, 1, 1, "first column must be id");
  if (header.size() < 2) fail_at(source, 1, 0, "no feature columns");
  std::vector<std::string> names;
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j].empty()) fail_at(source, 1, j + 1, "empty feature name");
    names.emplace_back(header[j]);
  }
  const std::size_t d = names.size();
  BinaryDataset data(d, std::move(names));

  std::size_t line_no = 1;
  while (read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != d + 1) {
      fail_at(source, line_no, 0,
              "expected " + std::to_string(d + 1) + " fields, got " +
                  std::to_string(fields.size()));
    }
    if (fields[0].empty()) fail_at(source, line_no, 1, "empty row id");
    if (data.find(fields[0])) {
      fail_at(source, line_no, 1,
              "duplicate row id '" + std::string(fields[0]) + "'");
    }
    BitVector row(d);
    for (std::size_t j = 0; j < d; ++j) {
      const auto cell = fields[j + 1];
      if (cell == "1") {
        row.set(j);
      } else if (cell != "0") {
        fail_at(source, line_no, j + 2,
                "cell must be 0 or 1, got '" + std::string(cell) + "'");
      }
    }
    data.add_row(std::string(fields[0]), std::move(row));
  }
  return data;
}

BinaryDataset load_csv(const std::string& path) {
  auto in = open_in(path);
  return parse_dataset_csv(in, path);
}

void write_dataset_csv(const BinaryDataset& data, std::ostream& out) {
  out << "id";
  for (const auto& name : data.feature_names()) out << ',' << name;
  out << '\n';
  std::string line;
  for (std::size_t i = 0; i < data.size(); ++i) {
    line = data.id(i);
    const BitVector& row = data.row(i);
    for (std::size_t j = 0; j < data.width(); ++j) {
      line += ',';
      line += row.test(j) ? '1' : '0';
    }
    line += '\n';
    out << line;
  }
}

void save_csv(const BinaryDataset& data, const std::string& path) {
  write_atomically(path, [&](std::ostream& out) { write_dataset_csv(data, out); });
}

LabelMap parse_labels_csv(std::istream& in, const BinaryDataset& data,
                          bool missing_as_normal, std::string_view source) {
  std::string line;
  if (!read_line(in, line)) fail_at(source, 1, 0, "missing header");
  const auto header = split_fields(line);
  if (header.size() != 2 || header[0] != "id" || header[1] != "label") {
    fail_at(source, 1, 0, "header must be id,label");
  }
  std::vector<Label> labels(data.size(), Label::kNormal);
  std::vector<bool> seen(data.size(), false);
  std::size_t line_no = 1;
  while (read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) {
      fail_at(source, line_no, 0,
              "expected 2 fields, got " + std::to_string(fields.size()));
    }
    const auto idx = data.find(fields[0]);
    if (!idx) {
      fail_at(source, line_no, 1,
              "unknown row id '" + std::string(fields[0]) + "'");
    }
    if (seen[*idx]) {
      fail_at(source, line_no, 1,
              "duplicate label for '" + std::string(fields[0]) + "'");
    }
    try {
      labels[*idx] = parse_label(fields[1]);
    } catch (const DataError& e) {
      fail_at(source, line_no, 2, e.what());
    }
    seen[*idx] = true;
  }
  if (!missing_as_normal) {
    const auto missing = std::find(seen.begin(), seen.end(), false);
    if (missing != seen.end()) {
      const auto n = static_cast<std::size_t>(
          std::count(seen.begin(), seen.end(), false));
      throw DataError(std::string(source) + ": " + std::to_string(n) +
                      " row(s) have no label, first '" +
                      data.id(static_cast<std::size_t>(missing - seen.begin())) +
                      "'");
    }
  }
  return LabelMap(std::move(labels));
}

LabelMap load_labels(const std::string& path, const BinaryDataset& data,
                     bool missing_as_normal) {
  auto in = open_in(path);
  return parse_labels_csv(in, data, missing_as_normal, path);
}

void write_labels_csv(const BinaryDataset& data, const LabelMap& labels,
                      std::ostream& out) {
  if (labels.size() != data.size()) {
    throw DataError("label count does not match dataset");
  }
  out << "id,label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.id(i) << ',' << label_name(labels.at(i)) << '\n';
  }
}

void save_labels(const BinaryDataset& data, const LabelMap& labels,
                 const std::string& path) {
  write_atomically(path, [&](std::ostream& out) {
    write_labels_csv(data, labels, out);
  });
}

std::size_t SyntheticSpec::anomaly_count() const {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * anomaly_fraction));
}

void SyntheticSpec::validate() const {
  if (n < 2) throw ConfigError("synthetic n must be >= 2");
  if (d < 2) throw ConfigError("synthetic d must be >= 2");
  if (!(anomaly_fraction > 0.0 && anomaly_fraction < 0.5)) {
    throw ConfigError("anomaly_fraction must be in (0, 0.5)");
  }
  if (anomaly_count() < 1) {
    throw ConfigError("round(n * anomaly_fraction) must be >= 1");
  }
  if (normal_clusters < 1) throw ConfigError("normal_clusters must be >= 1");
  if (!(density > 0.0 && density < 1.0)) {
    throw ConfigError("density must be in (0, 1)");
  }
  if (!(noise >= 0.0 && noise < 0.5)) {
    throw ConfigError("noise must be in [0, 0.5)");
  }
  if (mode == AnomalyMode::kClusterShifted) {
    if (anomaly_groups < 1) throw ConfigError("anomaly_groups must be >= 1");
    if (!(shift_fraction > 0.0 && shift_fraction <= 1.0)) {
      throw ConfigError("shift_fraction must be in (0, 1]");
    }
  }
}

SyntheticSpec canonical_synthetic_spec() { return SyntheticSpec{}; }

namespace {

BitVector random_prototype(std::size_t d, double density, Rng& rng) {
  BitVector v(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (rng.bernoulli(density)) v.set(j);
  }
  if (v.popcount() == 0) v.set(static_cast<std::size_t>(rng.below(d)));
  return v;
}

BitVector with_noise(const BitVector& proto, double noise, Rng& rng) {
  BitVector v = proto;
  if (noise <= 0.0) return v;
  for (std::size_t j = 0; j < proto.width(); ++j) {
    if (rng.bernoulli(noise)) v.set(j, !proto.test(j));
  }
  return v;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n_anom = spec.anomaly_count();

  std::vector<BitVector> protos;
  for (std::size_t c = 0; c < spec.normal_clusters; ++c) {
    protos.push_back(random_prototype(spec.d, spec.density, rng));
  }
  // Zipf weights 1/(c+1) as a cumulative table.
  std::vector<double> cumulative(spec.normal_clusters);
  double acc = 0.0;
  for (std::size_t c = 0; c < spec.normal_clusters; ++c) {
    acc += 1.0 / static_cast<double>(c + 1);
    cumulative[c] = acc;
  }

  std::vector<BitVector> shifted;
  if (spec.mode == AnomalyMode::kClusterShifted) {
    const auto flips = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(
               spec.shift_fraction * static_cast<double>(spec.d))));
    std::vector<std::size_t> positions(spec.d);
    for (std::size_t g = 0; g < spec.anomaly_groups; ++g) {
      BitVector v = protos[rng.below(spec.normal_clusters)];
      std::iota(positions.begin(), positions.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(positions));
      for (std::size_t f = 0; f < flips; ++f) {
        v.set(positions[f], !v.test(positions[f]));
      }
      shifted.push_back(std::move(v));
    }
  }

  std::vector<std::size_t> order(spec.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<bool> is_anomaly(spec.n, false);
  for (std::size_t i = 0; i < n_anom; ++i) is_anomaly[order[i]] = true;

  const int digits = static_cast<int>(std::to_string(spec.n - 1).size());
  BinaryDataset data(spec.d);
  std::vector<Label> labels(spec.n, Label::kNormal);
  char id[32];
  std::size_t next_group = 0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    std::snprintf(id, sizeof(id), "p%0*zu", digits, i);
    BitVector row;
    if (is_anomaly[i]) {
      labels[i] = Label::kAnomaly;
      if (spec.mode == AnomalyMode::kClusterShifted) {
        row = with_noise(shifted[next_group], spec.noise, rng);
        next_group = (next_group + 1) % shifted.size();
      } else {
        row = random_prototype(spec.d, spec.density, rng);
      }
    } else {
      const double u = rng.uniform() * acc;
      const auto c = static_cast<std::size_t>(
          std::upper_bound(cumulative.begin(), cumulative.end(), u) -
          cumulative.begin());
      row = with_noise(protos[std::min(c, protos.size() - 1)], spec.noise, rng);
    }
    data.add_row(id, std::move(row));
  }
  return {std::move(data), LabelMap(std::move(labels))};
}

Split split(const BinaryDataset& data, const LabelMap* labels, double fraction,
            std::uint64_t seed, bool stratified) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("split fraction must be in (0, 1)");
  }
  if (stratified && (labels == nullptr || labels->size() != data.size())) {
    throw DataError("stratified split needs labels for every row");
  }
  Rng rng(derive_seed(seed, "split"));
  Split out;
  auto take = [&](std::vector<std::size_t> pool) {
    rng.shuffle(std::span<std::size_t>(pool));
    const auto cut = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(pool.size())));
    out.first.insert(out.first.end(), pool.begin(), pool.begin() + cut);
    out.second.insert(out.second.end(), pool.begin() + cut, pool.end());
  };
  if (stratified) {
    std::vector<std::size_t> normals, anomalies;
    for (std::size_t i = 0; i < data.size(); ++i) {
      (labels->at(i) == Label::kAnomaly ? anomalies : normals).push_back(i);
    }
    take(std::move(normals));
    take(std::move(anomalies));
  } else {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    take(std::move(all));
  }
  if (out.first.empty() || out.second.empty()) {
    throw DataError("split of " + std::to_string(data.size()) +
                    " rows leaves an empty part");
  }
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

std::string DatasetSummary::format() const {
  char pct[32];
  std::snprintf(pct, sizeof(pct), "%.2f%%", anomaly_percent);
  return std::to_string(rows) + " / " + std::to_string(features) + " / " +
         std::to_string(anomalies) + " / " + pct;
}

DatasetSummary summarize_dataset(const BinaryDataset& data,
                                 const LabelMap* labels) {
  DatasetSummary s;
  s.rows = data.size();
  s.features = data.width();
  if (labels != nullptr) {
    s.anomalies = labels->anomaly_count();
    if (s.rows > 0) {
      s.anomaly_percent = 100.0 * static_cast<double>(s.anomalies) /
                          static_cast<double>(s.rows);
    }
  }
  return s;
}

}  // namespace sda2e

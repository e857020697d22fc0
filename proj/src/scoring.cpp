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

#include "sda2e/scoring.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sda2e/error.hpp"
#include "sda2e/kernels.hpp"
#include "sda2e/settings.hpp"

namespace sda2e {
namespace {

constexpr std::string_view kMagic = "sda2e-checkpoint 1";

[[noreturn]] void corrupt(const std::string& source, const std::string& what) {
  throw DataError(source + ": bad checkpoint: " + what);
}

}  // namespace

std::vector<double> score_all(const Sda2eModel& model,
                              std::span<const BitVector> rows) {
  std::vector<double> out(rows.size());
  kernels::score_rows_omp(model, rows, out);
  return out;
}

void write_checkpoint(Sda2eModel& model, std::ostream& out) {
  out << kMagic << '\n';
  for (const auto& [k, v] : model_settings(model.config())) {
    out << "config " << k << '=' << v << '\n';
  }
  char buf[64];
  for (ParamTensor* p : model.all_params()) {
    out << "param " << p->name << ' ' << p->value.rows() << ' '
        << p->value.cols() << '\n';
    for (std::size_t r = 0; r < p->value.rows(); ++r) {
      auto row = p->value.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        std::snprintf(buf, sizeof(buf), "%a", row[c]);
        if (c > 0) out << ' ';
        out << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
}

Sda2eModel read_checkpoint(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    corrupt(source, "missing header");
  }
  Sda2eConfig config;
  std::streampos mark = in.tellg();
  while (std::getline(in, line) && line.rfind("config ", 0) == 0) {
    const auto body = line.substr(7);
    const auto eq = body.find('=');
    if (eq == std::string::npos) corrupt(source, "config line without '='");
    if (!apply_model_setting(config, body.substr(0, eq), body.substr(eq + 1))) {
      corrupt(source, "unknown config key " + body.substr(0, eq));
    }
    mark = in.tellg();
  }
  in.clear();
  in.seekg(mark);

  Sda2eModel model(config);
  for (ParamTensor* p : model.all_params()) {
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "param") {
      corrupt(source, "expected tensor " + p->name);
    }
    if (name != p->name || rows != p->value.rows() ||
        cols != p->value.cols()) {
      corrupt(source, "tensor " + name + " does not match " + p->name + " " +
                          p->value.shape_string());
    }
    std::string token;
    for (double& v : p->value.values()) {
      if (!(in >> token)) corrupt(source, "truncated tensor " + name);
      char* end = nullptr;
      v = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size()) {
        corrupt(source, "bad value '" + token + "' in " + name);
      }
    }
  }
  std::string tail;
  if (!(in >> tail) || tail != "end") corrupt(source, "missing end marker");
  return model;
}

void save_checkpoint(Sda2eModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  write_checkpoint(model, out);
  if (!out) throw DataError("write failed for " + path);
}

Sda2eModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read_checkpoint(in, path);
}

}  // namespace sda2e

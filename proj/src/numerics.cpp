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

#include "sda2e/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sda2e/error.hpp"

namespace sda2e {
namespace {

void check_affine_shapes(std::span<const double> x, const Matrix& w,
                         std::span<const double> b, std::size_t out) {
  if (w.cols() != x.size() || w.rows() != b.size() || out != w.rows()) {
    std::ostringstream msg;
    msg << "affine: W is " << w.shape_string() << ", x has " << x.size()
        << ", b has " << b.size() << ", output has " << out;
    throw DimensionError(msg.str());
  }
}

}  // namespace

void Matrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

double sigmoid(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return std::clamp(s, kSigmoidFloor, kSigmoidCeil);
}

std::vector<double> affine_forward(std::span<const double> x, const Matrix& w,
                                   std::span<const double> b) {
  std::vector<double> out(w.rows());
  affine_forward_into(x, w, b, out);
  return out;
}

namespace {

// Positions of the nonzero entries of x when they are at most half of it,
// otherwise empty. Binary feature rows are mostly zeros.
bool sparse_support(std::span<const double> x, std::vector<std::size_t>& nz) {
  nz.clear();
  const std::size_t limit = x.size() / 2;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) {
      if (nz.size() == limit) return false;
      nz.push_back(j);
    }
  }
  return true;
}

}  // namespace

void affine_forward_into(std::span<const double> x, const Matrix& w,
                         std::span<const double> b, std::span<double> out) {
  check_affine_shapes(x, w, b, out.size());
  // Each output sums its terms in ascending column order, then adds the
  // bias. Zero inputs contribute exact zeros and are skipped. Rows advance
  // in blocks to hide add latency.
  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  const double* wp = w.values().data();
  const double* xp = x.data();
  thread_local std::vector<std::size_t> nz;
  std::size_t i = 0;
  if (sparse_support(x, nz)) {
    const std::size_t* idx = nz.data();
    const std::size_t m = nz.size();
    for (; i + 4 <= rows; i += 4) {
      const double* r0 = wp + i * cols;
      const double* r1 = r0 + cols;
      const double* r2 = r1 + cols;
      const double* r3 = r2 + cols;
      double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
      for (std::size_t t = 0; t < m; ++t) {
        const std::size_t j = idx[t];
        const double xj = xp[j];
        a0 += r0[j] * xj;
        a1 += r1[j] * xj;
        a2 += r2[j] * xj;
        a3 += r3[j] * xj;
      }
      out[i] = a0 + b[i];
      out[i + 1] = a1 + b[i + 1];
      out[i + 2] = a2 + b[i + 2];
      out[i + 3] = a3 + b[i + 3];
    }
    for (; i < rows; ++i) {
      const double* r = wp + i * cols;
      double acc = 0.0;
      for (std::size_t t = 0; t < m; ++t) acc += r[idx[t]] * xp[idx[t]];
      out[i] = acc + b[i];
    }
    return;
  }
  for (; i + 8 <= rows; i += 8) {
    const double* r0 = wp + i * cols;
    double a[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < cols; ++j) {
      const double xj = xp[j];
      for (std::size_t q = 0; q < 8; ++q) a[q] += r0[q * cols + j] * xj;
    }
    for (std::size_t q = 0; q < 8; ++q) out[i + q] = a[q] + b[i + q];
  }
  for (; i < rows; ++i) {
    const double* r = wp + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += r[j] * xp[j];
    out[i] = acc + b[i];
  }
}

void activate_inplace(std::span<double> x, Activation kind) {
  switch (kind) {
    case Activation::kIdentity:
      return;
    case Activation::kRelu:
      for (double& v : x) v = v > 0.0 ? v : 0.0;
      return;
    case Activation::kSigmoid:
      for (double& v : x) v = sigmoid(v);
      return;
  }
}

std::vector<double> activation(std::span<const double> x, Activation kind) {
  std::vector<double> out(x.begin(), x.end());
  activate_inplace(out, kind);
  return out;
}

double mse(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionError("mse: lengths " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    acc += diff * diff;
  }
  return acc;
}

double activation_derivative(double output, Activation kind) {
  switch (kind) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kRelu:
      return output > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid:
      if (output <= kSigmoidFloor || output >= kSigmoidCeil) return 0.0;
      return output * (1.0 - output);
  }
  return 0.0;
}

DenseLayer::DenseLayer(std::string name, std::size_t in, std::size_t out,
                       Activation act)
    : weight_(name + ".W", out, in), bias_(name + ".b", 1, out), act_(act) {}

void DenseLayer::initialize(Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
  for (double& v : weight_.value.values()) v = rng.uniform(-limit, limit);
  // A small positive ReLU bias keeps all-zero inputs off the kink at 0.
  bias_.value.fill(act_ == Activation::kRelu ? kReluBiasInit : 0.0);
}

void DenseLayer::forward(std::span<const double> x, Trace& trace) const {
  trace.input.assign(x.begin(), x.end());
  trace.output.resize(out_dim());
  affine_forward_into(trace.input, weight_.value, bias_.value.values(),
                      trace.output);
  activate_inplace(trace.output, act_);
}

void DenseLayer::backward(const Trace& trace, std::span<const double> upstream,
                          std::span<double> input_grad, bool param_grads) {
  const std::size_t in = in_dim();
  const std::size_t out = out_dim();
  if (upstream.size() != out || trace.output.size() != out ||
      trace.input.size() != in || (!input_grad.empty() && input_grad.size() != in)) {
    throw DimensionError("dense backward: trace/shape mismatch in " +
                         weight_.name);
  }
  delta_.resize(out);
  for (std::size_t i = 0; i < out; ++i) {
    delta_[i] = upstream[i] * activation_derivative(trace.output[i], act_);
  }
  if (param_grads) {
    double* gw = weight_.grad.values().data();
    double* gb = bias_.grad.values().data();
    const double* x = trace.input.data();
    thread_local std::vector<std::size_t> nz;
    const bool sparse = sparse_support(trace.input, nz);
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta_[i];
      gb[i] += d;
      if (d == 0.0) continue;
      double* row = gw + i * in;
      if (sparse) {
        for (std::size_t j : nz) row[j] += d * x[j];
      } else {
#pragma omp simd
        for (std::size_t j = 0; j < in; ++j) row[j] += d * x[j];
      }
    }
  }
  if (!input_grad.empty()) {
    std::fill(input_grad.begin(), input_grad.end(), 0.0);
    const double* w = weight_.value.values().data();
    double* g = input_grad.data();
    for (std::size_t i = 0; i < out; ++i) {
      const double d = delta_[i];
      if (d == 0.0) continue;
      const double* row = w + i * in;
#pragma omp simd
      for (std::size_t j = 0; j < in; ++j) g[j] += d * row[j];
    }
  }
}

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& widths,
         Activation hidden, Activation last) {
  if (widths.size() < 2) throw DimensionError("mlp needs at least 2 widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool is_last = i + 2 == widths.size();
    layers_.emplace_back(name + "." + std::to_string(i), widths[i],
                         widths[i + 1], is_last ? last : hidden);
  }
}

void Mlp::initialize(Rng& rng) {
  for (auto& layer : layers_) layer.initialize(rng);
}

std::span<const double> Mlp::forward(std::span<const double> x,
                                     Trace& trace) const {
  trace.resize(layers_.size());
  std::span<const double> current = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].forward(current, trace[i]);
    current = trace[i].output;
  }
  return current;
}

void Mlp::backward(const Trace& trace, std::span<const double> upstream,
                   std::span<double> input_grad, bool param_grads) {
  if (trace.size() != layers_.size()) {
    throw DimensionError("mlp backward: trace depth mismatch");
  }
  std::vector<double> grad(upstream.begin(), upstream.end());
  std::vector<double> next;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i == 0) {
      layers_[0].backward(trace[0], grad, input_grad, param_grads);
    } else {
      next.assign(layers_[i].in_dim(), 0.0);
      layers_[i].backward(trace[i], grad, next, param_grads);
      grad.swap(next);
    }
  }
}

void Mlp::collect(ParamList& out) {
  for (auto& layer : layers_) {
    out.push_back(&layer.weight());
    out.push_back(&layer.bias());
  }
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate,
                     ParamList params)
    : kind_(kind), learning_rate_(learning_rate), params_(std::move(params)) {
  if (!(learning_rate > 0.0)) {
    throw ConfigError("learning rate must be > 0");
  }
  if (kind_ == OptimizerKind::kAdam) {
    for (const ParamTensor* p : params_) {
      first_moment_.emplace_back(p->value.rows(), p->value.cols());
      second_moment_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
}

void Optimizer::zero_grad() {
  for (ParamTensor* p : params_) p->zero_grad();
}

void Optimizer::step() {
  for (const ParamTensor* p : params_) {
    if (!p->grad.all_finite()) {
      throw TrainingError("non-finite gradient in " + p->name);
    }
  }
  ++step_count_;
  if (kind_ == OptimizerKind::kSgd) {
    for (ParamTensor* p : params_) {
      auto v = p->value.values();
      auto g = p->grad.values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate_ * g[i];
    }
    return;
  }
  const double t = static_cast<double>(step_count_);
  const double c1 = 1.0 - std::pow(kBeta1, t);
  const double c2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto v = params_[k]->value.values();
    auto g = params_[k]->grad.values();
    auto m = first_moment_[k].values();
    auto s = second_moment_[k].values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      s[i] = kBeta2 * s[i] + (1.0 - kBeta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double s_hat = s[i] / c2;
      v[i] -= learning_rate_ * m_hat / (std::sqrt(s_hat) + kEpsilon);
    }
  }
}

std::vector<Matrix> finite_difference_grad(
    const std::function<double()>& loss, const ParamList& params, double eps,
    const std::function<bool()>& same_piece, KinkMask* mask,
    FdStencil stencil) {
  if (!(eps > 0.0)) throw ConfigError("finite difference eps must be > 0");
  if (mask != nullptr) {
    mask->kinked.clear();
    mask->count = 0;
  }
  // Probe offsets in units of eps.
  static const std::vector<double> kTwo = {1, -1};
  static const std::vector<double> kFour = {2, 1, -1, -2};
  const auto& probes = stencil == FdStencil::kFourPoint ? kFour : kTwo;
  std::vector<double> f(probes.size());
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (ParamTensor* p : params) {
    Matrix g(p->value.rows(), p->value.cols());
    auto values = p->value.values();
    std::vector<char> kinked(values.size(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      bool smooth = true;
      for (std::size_t q = 0; q < probes.size(); ++q) {
        values[i] = saved + probes[q] * eps;
        f[q] = loss();
        if (same_piece) smooth = smooth && same_piece();
        if (!std::isfinite(f[q])) {
          values[i] = saved;
          throw TrainingError("finite difference: non-finite loss probing " +
                              p->name);
        }
      }
      values[i] = saved;
      if (!smooth) {
        kinked[i] = 1;
        if (mask != nullptr) ++mask->count;
        continue;
      }
      if (stencil == FdStencil::kTwoPoint) {
        g.values()[i] = (f[0] - f[1]) / (2.0 * eps);
      } else {
        // Differences first, so a flat direction gives exactly 0.
        g.values()[i] = (8.0 * (f[1] - f[2]) - (f[0] - f[3])) / (12.0 * eps);
      }
    }
    if (mask != nullptr) mask->kinked.push_back(std::move(kinked));
    grads.push_back(std::move(g));
  }
  return grads;
}

double max_relative_error(const Matrix& analytic, const Matrix& numeric,
                          double floor, std::span<const char> skip) {
  if (!analytic.same_shape(numeric)) {
    throw DimensionError("relative error: shapes " + analytic.shape_string() +
                         " vs " + numeric.shape_string());
  }
  double worst = 0.0;
  auto a = analytic.values();
  auto n = numeric.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!skip.empty() && skip[i]) continue;
    const double denom = std::max({std::abs(a[i]), std::abs(n[i]), floor});
    worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
  }
  return worst;
}

}  // namespace sda2e

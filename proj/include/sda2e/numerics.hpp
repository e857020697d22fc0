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

#ifndef SDA2E_NUMERICS_HPP_
#define SDA2E_NUMERICS_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sda2e/rng.hpp"

namespace sda2e {

// Dense row-major matrix of doubles. Vectors are 1 x n matrices where a
// parameter needs one.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    return values_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> row(std::size_t r) {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// A trainable tensor with its gradient accumulator.
struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;

  ParamTensor() = default;
  ParamTensor(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

using ParamList = std::vector<ParamTensor*>;

enum class Activation { kIdentity, kRelu, kSigmoid };

inline constexpr double kSigmoidFloor = 1e-7;
inline constexpr double kSigmoidCeil = 1.0 - 1e-7;

// Logistic function clamped to [kSigmoidFloor, kSigmoidCeil].
double sigmoid(double x);

// out[i] = sum_j W[i][j] * x[j] + b[i].
std::vector<double> affine_forward(std::span<const double> x, const Matrix& w,
                                   std::span<const double> b);
void affine_forward_into(std::span<const double> x, const Matrix& w,
                         std::span<const double> b, std::span<double> out);

std::vector<double> activation(std::span<const double> x, Activation kind);
void activate_inplace(std::span<double> x, Activation kind);

// Squared L2 distance. Callers average over the batch.
double mse(std::span<const double> x, std::span<const double> y);

// Derivative of the activation expressed through its output. ReLU is 0 at
// exactly 0; clamped sigmoid outputs have derivative 0.
double activation_derivative(double output, Activation kind);

// Fully connected layer followed by an elementwise activation.
class DenseLayer {
 public:
  struct Trace {
    std::vector<double> input;
    std::vector<double> output;
  };

  DenseLayer() = default;
  DenseLayer(std::string name, std::size_t in, std::size_t out,
             Activation act);

  std::size_t in_dim() const { return weight_.value.cols(); }
  std::size_t out_dim() const { return weight_.value.rows(); }
  Activation activation_kind() const { return act_; }

  static constexpr double kReluBiasInit = 0.01;

  // Glorot-uniform weights; bias kReluBiasInit for ReLU layers, else 0.
  void initialize(Rng& rng);

  void forward(std::span<const double> x, Trace& trace) const;
  // Accumulates dL/dW, dL/db from `upstream` = dL/d(output) unless
  // `param_grads` is false. Writes dL/d(input) into `input_grad` unless it
  // is empty.
  void backward(const Trace& trace, std::span<const double> upstream,
                std::span<double> input_grad, bool param_grads = true);

  ParamTensor& weight() { return weight_; }
  ParamTensor& bias() { return bias_; }
  const ParamTensor& weight() const { return weight_; }
  const ParamTensor& bias() const { return bias_; }

 private:
  ParamTensor weight_;
  ParamTensor bias_;
  Activation act_ = Activation::kIdentity;
  std::vector<double> delta_;
};

// A stack of dense layers.
class Mlp {
 public:
  using Trace = std::vector<DenseLayer::Trace>;

  Mlp() = default;
  // widths = {in, h1, ..., out}; `hidden` applies to every layer except the
  // last, which uses `last`.
  Mlp(const std::string& name, const std::vector<std::size_t>& widths,
      Activation hidden, Activation last);

  void initialize(Rng& rng);
  std::span<const double> forward(std::span<const double> x,
                                  Trace& trace) const;
  void backward(const Trace& trace, std::span<const double> upstream,
                std::span<double> input_grad, bool param_grads = true);

  std::size_t in_dim() const { return layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.back().out_dim(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  void collect(ParamList& out);

 private:
  std::vector<DenseLayer> layers_;
};

enum class OptimizerKind { kSgd, kAdam };

// First-order optimizer over a fixed parameter list. Adam uses beta1 = 0.9,
// beta2 = 0.999, eps = 1e-8 with bias correction.
class Optimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Optimizer(OptimizerKind kind, double learning_rate, ParamList params);

  // Throws TrainingError if any gradient is non-finite; parameters are left
  // untouched in that case.
  void step();
  void zero_grad();

  std::size_t step_count() const { return step_count_; }
  double learning_rate() const { return learning_rate_; }
  OptimizerKind kind() const { return kind_; }

 private:
  OptimizerKind kind_;
  double learning_rate_;
  ParamList params_;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
  std::size_t step_count_ = 0;
};

// Coordinates whose probes left the smooth piece of the base point.
struct KinkMask {
  std::vector<std::vector<char>> kinked;  // per tensor, per scalar
  std::size_t count = 0;
};

// Central differences (f(p + eps) - f(p - eps)) / (2 eps) for every scalar of
// every tensor in `params`, or the fourth-order central stencil
// (-f(p+2e) + 8f(p+e) - 8f(p-e) + f(p-2e)) / (12 e). Values are restored
// afterwards. Throws TrainingError if the loss is non-finite at any probe.
//
// When `same_piece` is given it is evaluated at every probe of every
// coordinate; a false result marks the coordinate in `mask` (its difference
// quotient straddles a non-differentiable point) and stores 0 for it.
enum class FdStencil { kTwoPoint, kFourPoint };

std::vector<Matrix> finite_difference_grad(
    const std::function<double()>& loss, const ParamList& params,
    double eps = 1e-4, const std::function<bool()>& same_piece = {},
    KinkMask* mask = nullptr, FdStencil stencil = FdStencil::kTwoPoint);

// max over entries of |a - n| / max(|a|, |n|, floor). Entries flagged in
// `skip` (same shape, may be empty) are ignored.
double max_relative_error(const Matrix& analytic, const Matrix& numeric,
                          double floor, std::span<const char> skip = {});

}  // namespace sda2e

#endif  // SDA2E_NUMERICS_HPP_

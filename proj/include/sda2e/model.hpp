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

#ifndef SDA2E_MODEL_HPP_
#define SDA2E_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sda2e/numerics.hpp"

namespace sda2e {

enum class AttentionMode { kAuto, kDense, kLowRank };

// Dense attention switches to low rank above this width under kAuto.
inline constexpr std::size_t kDenseAttentionMaxWidth = 2048;

// Hyperparameters of the dual adversarial attention autoencoder. Loss weights
// default to alpha = 1.0, beta = 3.0, gamma = 0.01, delta = 0.1, margin 1.0,
// lambda = 0.01, rho = 0.1 and 100 epochs.
struct Sda2eConfig {
  std::size_t d = 0;
  std::size_t k = 0;                 // 0: ceil(d/8) clamped to [2, 64]
  std::vector<std::size_t> hidden;   // empty: {max(k, ceil(d/2))}
  double alpha = 1.0;
  double beta = 3.0;
  double gamma = 0.01;
  double delta = 0.1;
  double margin = 1.0;
  double rho = 0.1;
  double lambda = 0.01;
  double lr_g = 1e-3;
  double lr_d = 1e-3;
  double lr_a = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  AttentionMode attention_mode = AttentionMode::kAuto;
  std::size_t attention_rank = 64;
  double sharpness = 0.01;  // c in the activation surrogate 1 - exp(-z/c)
  OptimizerKind optimizer = OptimizerKind::kAdam;

  // Copy with k, hidden and attention mode filled in from d.
  Sda2eConfig resolved() const;
  // Throws ConfigError naming the violated invariant.
  void validate() const;

  friend bool operator==(const Sda2eConfig&, const Sda2eConfig&) = default;
};

std::size_t default_latent_dim(std::size_t d);

// Feature-wise gate A(x) = sigmoid(W x + b), or sigmoid(U (V^T x) + b) in
// low-rank mode.
class AttentionGate {
 public:
  struct Trace {
    std::vector<double> input;
    std::vector<double> projected;  // V^T x, low-rank mode only
    std::vector<double> mask;
  };

  AttentionGate() = default;
  AttentionGate(std::size_t d, AttentionMode mode, std::size_t rank);

  void initialize(Rng& rng);
  void forward(std::span<const double> x, Trace& trace) const;
  // upstream = dL/d(mask). Accumulates parameter grads; adds dL/dx into
  // `input_grad` when it is non-empty.
  void backward(const Trace& trace, std::span<const double> upstream,
                std::span<double> input_grad);

  AttentionMode mode() const { return mode_; }
  std::size_t width() const { return bias_.value.cols(); }
  void collect(ParamList& out);

  ParamTensor& dense_weight() { return weight_; }
  ParamTensor& left() { return left_; }
  ParamTensor& right() { return right_; }
  ParamTensor& bias() { return bias_; }

 private:
  AttentionMode mode_ = AttentionMode::kDense;
  ParamTensor weight_;  // d x d
  ParamTensor left_;    // U, d x r
  ParamTensor right_;   // V, d x r
  ParamTensor bias_;    // 1 x d
  std::vector<double> pre_grad_;
  std::vector<double> low_grad_;
  std::vector<std::size_t> nz_;
};

// Encoder (ReLU hidden layers, ReLU bottleneck) and mirrored decoder (ReLU
// hidden layers, sigmoid output).
class Autoencoder {
 public:
  struct Trace {
    Mlp::Trace encoder;
    Mlp::Trace decoder;
    std::span<const double> latent() const { return encoder.back().output; }
    std::span<const double> output() const { return decoder.back().output; }
  };

  Autoencoder() = default;
  Autoencoder(const std::string& name, std::size_t d, std::size_t k,
              const std::vector<std::size_t>& hidden);

  void initialize(Rng& rng);
  void forward(std::span<const double> x, Trace& trace) const;
  // upstream_out = dL/d(output), latent_extra = additional dL/d(latent).
  void backward(const Trace& trace, std::span<const double> upstream_out,
                std::span<const double> latent_extra,
                std::span<double> input_grad, bool param_grads = true);

  Mlp& encoder() { return encoder_; }
  Mlp& decoder() { return decoder_; }
  const Mlp& encoder() const { return encoder_; }
  const Mlp& decoder() const { return decoder_; }
  void collect(ParamList& out);

 private:
  Mlp encoder_;
  Mlp decoder_;
  std::vector<double> latent_grad_;
};

// Everything one sample's forward pass produces.
struct ForwardTrace {
  AttentionGate::Trace attn_real;  // a = A(x)
  std::vector<double> x_star;      // x * a
  Autoencoder::Trace gen;          // z_G, x_hat
  AttentionGate::Trace attn_fake;  // a_hat = A(x_hat)
  std::vector<double> x_hat_star;  // x_hat * a_hat
  Autoencoder::Trace disc_real;    // D(x*)
  Autoencoder::Trace disc_fake;    // D(x_hat*)
  double e_real = 0.0;
  double e_fake = 0.0;

  std::span<const double> mask() const { return attn_real.mask; }
  std::span<const double> z_g() const { return gen.latent(); }
  std::span<const double> x_hat() const { return gen.output(); }
  std::span<const double> mask_hat() const { return attn_fake.mask; }
};

struct LossBreakdown {
  double recon_g = 0.0;
  double adv_g = 0.0;
  double sparse_g = 0.0;
  double attn = 0.0;
  double total_g = 0.0;
  double adv_d = 0.0;
  double sparse_d = 0.0;
  double total_d = 0.0;
};

inline constexpr double kRhoHatFloor = 1e-4;
inline constexpr double kRhoHatCeil = 1.0 - 1e-4;

// sum_j KL(Bernoulli(rho_hat_j) || Bernoulli(rho)), natural log.
double kl_sparsity(std::span<const double> rho_hat, double rho);
// d/d(rho_hat) of one KL term.
double kl_sparsity_derivative(double rho_hat, double rho);

// Smooth activation frequency: mean over rows of 1 - exp(-z/c), clamped to
// [kRhoHatFloor, kRhoHatCeil]. `latents` is B x k, entries >= 0.
std::vector<double> empirical_activation(const Matrix& latents, double c);
// Exact frequency of z > 0 per unit (unclamped), for reporting.
std::vector<double> indicator_activation(const Matrix& latents);

class Sda2eModel {
 public:
  Sda2eModel() = default;
  // Resolves and validates the config, then initializes from config.seed.
  explicit Sda2eModel(const Sda2eConfig& config);

  const Sda2eConfig& config() const { return config_; }
  std::size_t input_dim() const { return config_.d; }
  std::size_t latent_dim() const { return config_.k; }

  // Re-draws all parameters from `seed`.
  void initialize(std::uint64_t seed);

  ForwardTrace forward(std::span<const double> x) const;
  void forward(std::span<const double> x, ForwardTrace& trace) const;

  std::vector<double> attention_mask(std::span<const double> x) const;
  // G(x*) with x* = x * A(x); `trace` is reused scratch.
  std::span<const double> reconstruct(std::span<const double> x,
                                      ForwardTrace& scratch) const;
  // ||x - G(x*)||^2.
  double anomaly_score(std::span<const double> x) const;
  double anomaly_score(std::span<const double> x, ForwardTrace& scratch) const;
  // (E_real, E_fake) = (||x - D(x*)||^2, ||x_hat - D(x_hat*)||^2).
  std::pair<double, double> discriminator_energies(
      std::span<const double> x, std::span<const double> x_hat) const;
  // Generator latent code of the attention-modulated input.
  std::vector<double> latent(std::span<const double> x) const;

  LossBreakdown generator_loss(const Matrix& batch) const;
  LossBreakdown discriminator_loss(const Matrix& batch) const;

  // Forward and backward over the batch; grads are accumulated, not zeroed.
  // The generator pass also writes (unused) discriminator grads.
  LossBreakdown accumulate_generator_grads(const Matrix& batch);
  LossBreakdown accumulate_discriminator_grads(const Matrix& batch);
  // Training-loop variants. The discriminator pass fills `traces`; the
  // generator pass reuses them, recomputing only D(x_hat*), which is valid
  // while G and A are unchanged since the discriminator pass.
  LossBreakdown accumulate_discriminator_grads(
      const Matrix& batch, std::vector<ForwardTrace>& traces);
  LossBreakdown accumulate_generator_grads(const Matrix& batch,
                                           std::vector<ForwardTrace>& traces);

  ParamList generator_params();
  ParamList discriminator_params();
  ParamList attention_params();
  ParamList all_params();

  AttentionGate& attention() { return attention_; }
  Autoencoder& generator() { return generator_; }
  Autoencoder& discriminator() { return discriminator_; }

 private:
  LossBreakdown generator_backward(const Matrix& batch,
                                   const std::vector<ForwardTrace>& traces);

  Sda2eConfig config_;
  AttentionGate attention_;
  Autoencoder generator_;
  Autoencoder discriminator_;
};

// On/off state of every non-differentiable switch the batch's losses pass
// through: ReLU units, sigmoid clamps, the margin hinge and the activation
// frequency clamps. Two parameter settings with equal patterns lie on the
// same smooth piece of both objectives.
std::vector<std::uint8_t> activation_pattern(const Sda2eModel& model,
                                             const Matrix& batch);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown mean;
};

struct TrainOptions {
  // Called after every epoch with the current model.
  std::function<void(const Sda2eModel&, const EpochStats&)> on_epoch;
};

struct TrainResult {
  Sda2eModel model;
  std::vector<EpochStats> history;
};

// Alternating mini-batch training: a discriminator step on L_total(D), then a
// generator step and an attention step, both from the gradient of
// L_total(G). Throws TrainingError on empty data or a non-finite loss.
TrainResult train(const Matrix& data, const Sda2eConfig& config,
                  const TrainOptions& options = {});

// Continues training `model` for `epochs` epochs with fresh optimizer state.
std::vector<EpochStats> train_in_place(Sda2eModel& model, const Matrix& data,
                                       std::size_t epochs,
                                       std::uint64_t shuffle_seed,
                                       const TrainOptions& options = {});

}  // namespace sda2e

#endif  // SDA2E_MODEL_HPP_

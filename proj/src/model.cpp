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

#include "sda2e/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sda2e/error.hpp"

namespace sda2e {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

void check_width(std::span<const double> x, std::size_t d, const char* what) {
  if (x.size() != d) {
    throw DimensionError(std::string(what) + ": expected width " +
                         std::to_string(d) + ", got " +
                         std::to_string(x.size()));
  }
}

double surrogate_slope(double z, double c) { return std::exp(-z / c) / c; }

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.total_g) && std::isfinite(l.total_d) &&
         std::isfinite(l.recon_g) && std::isfinite(l.adv_g) &&
         std::isfinite(l.adv_d);
}

}  // namespace

std::size_t default_latent_dim(std::size_t d) {
  std::size_t k = std::clamp<std::size_t>((d + 7) / 8, 2, 64);
  if (d >= 2 && k >= d) k = d - 1;
  return k;
}

Sda2eConfig Sda2eConfig::resolved() const {
  Sda2eConfig out = *this;
  if (out.k == 0) out.k = default_latent_dim(d);
  if (out.hidden.empty()) out.hidden = {std::max(out.k, (d + 1) / 2)};
  if (out.attention_mode == AttentionMode::kAuto) {
    out.attention_mode = d > kDenseAttentionMaxWidth ? AttentionMode::kLowRank
                                                     : AttentionMode::kDense;
  }
  return out;
}

void Sda2eConfig::validate() const {
  require(d >= 2, "d >= 2");
  require(k > 0 && k < d, "0 < k < d (k=" + std::to_string(k) +
                              ", d=" + std::to_string(d) + ")");
  for (std::size_t h : hidden) require(h > 0, "hidden widths > 0");
  require(rho > 0.0 && rho < 1.0, "0 < rho < 1");
  require(margin > 0.0, "m > 0");
  require(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0 && delta >= 0.0,
          "loss weights alpha, beta, gamma, delta >= 0");
  require(lambda >= 0.0, "lambda >= 0");
  require(lr_g > 0.0 && lr_d > 0.0 && lr_a > 0.0, "learning rates > 0");
  require(batch_size >= 1, "B >= 1");
  require(sharpness > 0.0, "sparsity sharpness c > 0");
  if (attention_mode == AttentionMode::kLowRank) {
    require(attention_rank >= 1, "attention rank >= 1");
  }
}

// ---------------------------------------------------------------------------
// Attention gate

AttentionGate::AttentionGate(std::size_t d, AttentionMode mode,
                             std::size_t rank)
    : mode_(mode), bias_("attn.b", 1, d) {
  if (mode_ == AttentionMode::kLowRank) {
    left_ = ParamTensor("attn.U", d, rank);
    right_ = ParamTensor("attn.V", d, rank);
  } else {
    mode_ = AttentionMode::kDense;
    weight_ = ParamTensor("attn.W", d, d);
  }
}

void AttentionGate::initialize(Rng& rng) {
  const std::size_t d = width();
  if (mode_ == AttentionMode::kDense) {
    const double limit = std::sqrt(6.0 / static_cast<double>(2 * d));
    for (double& v : weight_.value.values()) v = rng.uniform(-limit, limit);
  } else {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(d + left_.value.cols()));
    for (double& v : left_.value.values()) v = rng.uniform(-limit, limit);
    for (double& v : right_.value.values()) v = rng.uniform(-limit, limit);
  }
  bias_.value.fill(0.0);
}

void AttentionGate::forward(std::span<const double> x, Trace& trace) const {
  const std::size_t d = width();
  check_width(x, d, "attention");
  trace.input.assign(x.begin(), x.end());
  trace.mask.resize(d);
  if (mode_ == AttentionMode::kDense) {
    affine_forward_into(trace.input, weight_.value, bias_.value.values(),
                        trace.mask);
  } else {
    const std::size_t r = right_.value.cols();
    trace.projected.assign(r, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = trace.input[i];
      if (xi == 0.0) continue;
      auto row = right_.value.row(i);
      for (std::size_t q = 0; q < r; ++q) trace.projected[q] += row[q] * xi;
    }
    affine_forward_into(trace.projected, left_.value, bias_.value.values(),
                        trace.mask);
  }
  activate_inplace(trace.mask, Activation::kSigmoid);
}

void AttentionGate::backward(const Trace& trace,
                             std::span<const double> upstream,
                             std::span<double> input_grad) {
  const std::size_t d = width();
  if (upstream.size() != d || trace.mask.size() != d) {
    throw DimensionError("attention backward: shape mismatch");
  }
  pre_grad_.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    pre_grad_[j] =
        upstream[j] * activation_derivative(trace.mask[j], Activation::kSigmoid);
  }
  auto gb = bias_.grad.values();
  for (std::size_t j = 0; j < d; ++j) gb[j] += pre_grad_[j];
  const double* x = trace.input.data();

  if (mode_ == AttentionMode::kDense) {
    // Binary inputs are mostly zero; only their support feeds dW.
    nz_.clear();
    for (std::size_t i = 0; i < d; ++i) {
      if (x[i] != 0.0) nz_.push_back(i);
    }
    const bool sparse = nz_.size() * 2 <= d;
    for (std::size_t j = 0; j < d; ++j) {
      const double g = pre_grad_[j];
      if (g == 0.0) continue;
      auto grow = weight_.grad.row(j);
      if (sparse) {
        for (std::size_t i : nz_) grow[i] += g * x[i];
      } else {
        for (std::size_t i = 0; i < d; ++i) grow[i] += g * x[i];
      }
      if (!input_grad.empty()) {
        auto wrow = weight_.value.row(j);
        for (std::size_t i = 0; i < d; ++i) input_grad[i] += g * wrow[i];
      }
    }
    return;
  }

  const std::size_t r = left_.value.cols();
  low_grad_.assign(r, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const double g = pre_grad_[j];
    if (g == 0.0) continue;
    auto ug = left_.grad.row(j);
    auto uv = left_.value.row(j);
    for (std::size_t q = 0; q < r; ++q) {
      ug[q] += g * trace.projected[q];
      low_grad_[q] += g * uv[q];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    auto vg = right_.grad.row(i);
    for (std::size_t q = 0; q < r; ++q) vg[q] += x[i] * low_grad_[q];
    if (!input_grad.empty()) {
      auto vv = right_.value.row(i);
      double acc = 0.0;
      for (std::size_t q = 0; q < r; ++q) acc += vv[q] * low_grad_[q];
      input_grad[i] += acc;
    }
  }
}

void AttentionGate::collect(ParamList& out) {
  if (mode_ == AttentionMode::kDense) {
    out.push_back(&weight_);
  } else {
    out.push_back(&left_);
    out.push_back(&right_);
  }
  out.push_back(&bias_);
}

// ---------------------------------------------------------------------------
// Autoencoder

Autoencoder::Autoencoder(const std::string& name, std::size_t d, std::size_t k,
                         const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> enc{d};
  enc.insert(enc.end(), hidden.begin(), hidden.end());
  enc.push_back(k);
  std::vector<std::size_t> dec(enc.rbegin(), enc.rend());
  encoder_ = Mlp(name + ".enc", enc, Activation::kRelu, Activation::kRelu);
  decoder_ = Mlp(name + ".dec", dec, Activation::kRelu, Activation::kSigmoid);
}

void Autoencoder::initialize(Rng& rng) {
  encoder_.initialize(rng);
  decoder_.initialize(rng);
}

void Autoencoder::forward(std::span<const double> x, Trace& trace) const {
  encoder_.forward(x, trace.encoder);
  decoder_.forward(trace.latent(), trace.decoder);
}

void Autoencoder::backward(const Trace& trace,
                           std::span<const double> upstream_out,
                           std::span<const double> latent_extra,
                           std::span<double> input_grad, bool param_grads) {
  latent_grad_.assign(encoder_.out_dim(), 0.0);
  decoder_.backward(trace.decoder, upstream_out, latent_grad_, param_grads);
  if (!latent_extra.empty()) {
    for (std::size_t j = 0; j < latent_grad_.size(); ++j) {
      latent_grad_[j] += latent_extra[j];
    }
  }
  encoder_.backward(trace.encoder, latent_grad_, input_grad, param_grads);
}

void Autoencoder::collect(ParamList& out) {
  encoder_.collect(out);
  decoder_.collect(out);
}

// ---------------------------------------------------------------------------
// Sparsity

double kl_sparsity(std::span<const double> rho_hat, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw ConfigError("kl_sparsity: rho must lie in (0, 1)");
  }
  double total = 0.0;
  for (double p : rho_hat) {
    if (!(p > 0.0 && p < 1.0)) {
      throw ConfigError("kl_sparsity: rho_hat entries must lie in (0, 1)");
    }
    total += p * std::log(p / rho) + (1.0 - p) * std::log((1.0 - p) / (1.0 - rho));
  }
  return total;
}

double kl_sparsity_derivative(double rho_hat, double rho) {
  return std::log(rho_hat / rho) - std::log((1.0 - rho_hat) / (1.0 - rho));
}

std::vector<double> empirical_activation(const Matrix& latents, double c) {
  if (latents.rows() == 0) throw DimensionError("empirical_activation: B = 0");
  std::vector<double> out(latents.cols(), 0.0);
  for (std::size_t i = 0; i < latents.rows(); ++i) {
    for (std::size_t j = 0; j < latents.cols(); ++j) {
      const double z = latents(i, j);
      if (z < 0.0) {
        throw DimensionError("empirical_activation: negative latent");
      }
      out[j] += 1.0 - std::exp(-z / c);
    }
  }
  const double inv = 1.0 / static_cast<double>(latents.rows());
  for (double& v : out) v = std::clamp(v * inv, kRhoHatFloor, kRhoHatCeil);
  return out;
}

std::vector<double> indicator_activation(const Matrix& latents) {
  std::vector<double> out(latents.cols(), 0.0);
  if (latents.rows() == 0) return out;
  for (std::size_t i = 0; i < latents.rows(); ++i) {
    for (std::size_t j = 0; j < latents.cols(); ++j) {
      if (latents(i, j) > 0.0) out[j] += 1.0;
    }
  }
  for (double& v : out) v /= static_cast<double>(latents.rows());
  return out;
}

namespace {

// Raw (unclamped) smooth frequency and its clamp-aware KL slope per unit.
struct SparsityTerm {
  std::vector<double> rho_hat;  // clamped
  std::vector<double> slope;    // dKL/d(rho_hat), 0 where clamped
  double value = 0.0;
};

SparsityTerm sparsity_term(const std::vector<std::span<const double>>& codes,
                           double c, double rho) {
  const std::size_t k = codes.front().size();
  std::vector<double> raw(k, 0.0);
  for (const auto& z : codes) {
    for (std::size_t j = 0; j < k; ++j) raw[j] += 1.0 - std::exp(-z[j] / c);
  }
  SparsityTerm term;
  term.rho_hat.resize(k);
  term.slope.resize(k);
  const double inv = 1.0 / static_cast<double>(codes.size());
  for (std::size_t j = 0; j < k; ++j) {
    const double p = raw[j] * inv;
    const double clamped = std::clamp(p, kRhoHatFloor, kRhoHatCeil);
    term.rho_hat[j] = clamped;
    term.slope[j] = (p == clamped) ? kl_sparsity_derivative(clamped, rho) : 0.0;
  }
  term.value = kl_sparsity(term.rho_hat, rho);
  return term;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model

Sda2eModel::Sda2eModel(const Sda2eConfig& config)
    : config_(config.resolved()) {
  config_.validate();
  attention_ = AttentionGate(config_.d, config_.attention_mode,
                             config_.attention_rank);
  generator_ = Autoencoder("gen", config_.d, config_.k, config_.hidden);
  discriminator_ = Autoencoder("disc", config_.d, config_.k, config_.hidden);
  initialize(config_.seed);
}

void Sda2eModel::initialize(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init"));
  attention_.initialize(rng);
  generator_.initialize(rng);
  discriminator_.initialize(rng);
}

namespace {

void modulate(std::span<const double> x, std::span<const double> mask,
              std::vector<double>& out) {
  out.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
}

}  // namespace

void Sda2eModel::forward(std::span<const double> x, ForwardTrace& t) const {
  check_width(x, config_.d, "forward");
  attention_.forward(x, t.attn_real);
  modulate(x, t.attn_real.mask, t.x_star);
  generator_.forward(t.x_star, t.gen);
  attention_.forward(t.x_hat(), t.attn_fake);
  modulate(t.x_hat(), t.attn_fake.mask, t.x_hat_star);
  discriminator_.forward(t.x_star, t.disc_real);
  discriminator_.forward(t.x_hat_star, t.disc_fake);
  t.e_real = mse(x, t.disc_real.output());
  t.e_fake = mse(t.x_hat(), t.disc_fake.output());
}

ForwardTrace Sda2eModel::forward(std::span<const double> x) const {
  ForwardTrace t;
  forward(x, t);
  return t;
}

std::vector<double> Sda2eModel::attention_mask(std::span<const double> x) const {
  AttentionGate::Trace t;
  attention_.forward(x, t);
  return t.mask;
}

std::span<const double> Sda2eModel::reconstruct(std::span<const double> x,
                                                ForwardTrace& t) const {
  check_width(x, config_.d, "reconstruct");
  attention_.forward(x, t.attn_real);
  modulate(x, t.attn_real.mask, t.x_star);
  generator_.forward(t.x_star, t.gen);
  return t.x_hat();
}

double Sda2eModel::anomaly_score(std::span<const double> x,
                                 ForwardTrace& scratch) const {
  return mse(x, reconstruct(x, scratch));
}

double Sda2eModel::anomaly_score(std::span<const double> x) const {
  ForwardTrace scratch;
  return anomaly_score(x, scratch);
}

std::vector<double> Sda2eModel::latent(std::span<const double> x) const {
  ForwardTrace t;
  reconstruct(x, t);
  auto z = t.z_g();
  return {z.begin(), z.end()};
}

std::pair<double, double> Sda2eModel::discriminator_energies(
    std::span<const double> x, std::span<const double> x_hat) const {
  check_width(x, config_.d, "discriminator_energies");
  check_width(x_hat, config_.d, "discriminator_energies");
  AttentionGate::Trace a;
  std::vector<double> modulated;
  Autoencoder::Trace dt;

  attention_.forward(x, a);
  modulate(x, a.mask, modulated);
  discriminator_.forward(modulated, dt);
  const double e_real = mse(x, dt.output());

  attention_.forward(x_hat, a);
  modulate(x_hat, a.mask, modulated);
  discriminator_.forward(modulated, dt);
  const double e_fake = mse(x_hat, dt.output());
  return {e_real, e_fake};
}

namespace {

std::vector<ForwardTrace> forward_batch(const Sda2eModel& model,
                                        const Matrix& batch) {
  if (batch.rows() == 0) throw DimensionError("empty batch");
  std::vector<ForwardTrace> traces(batch.rows());
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    model.forward(batch.row(i), traces[i]);
  }
  return traces;
}

struct GeneratorTerms {
  LossBreakdown loss;
  SparsityTerm sparsity;
};

GeneratorTerms generator_terms(const Sda2eConfig& cfg, const Matrix& batch,
                               const std::vector<ForwardTrace>& traces) {
  GeneratorTerms out;
  const double inv_b = 1.0 / static_cast<double>(batch.rows());
  std::vector<std::span<const double>> codes;
  double recon = 0.0, adv = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    recon += mse(batch.row(i), t.x_hat());
    adv += t.e_fake;
    for (double a : t.mask()) l1 += a;
    codes.push_back(t.z_g());
  }
  out.sparsity = sparsity_term(codes, cfg.sharpness, cfg.rho);
  auto& l = out.loss;
  l.recon_g = recon * inv_b;
  l.adv_g = adv * inv_b;
  l.sparse_g = out.sparsity.value;
  l.attn = cfg.lambda * l1 * inv_b;
  l.total_g = l.recon_g + cfg.alpha * l.adv_g + cfg.beta * l.sparse_g +
              cfg.gamma * l.attn;
  return out;
}

struct DiscriminatorTerms {
  LossBreakdown loss;
  SparsityTerm sparsity;
};

DiscriminatorTerms discriminator_terms(const Sda2eConfig& cfg,
                                       const std::vector<ForwardTrace>& traces) {
  DiscriminatorTerms out;
  const double inv_b = 1.0 / static_cast<double>(traces.size());
  std::vector<std::span<const double>> codes;
  double adv = 0.0;
  for (const auto& t : traces) {
    adv += t.e_real + std::max(0.0, cfg.margin - t.e_fake);
    codes.push_back(t.disc_real.latent());
    codes.push_back(t.disc_fake.latent());
  }
  out.sparsity = sparsity_term(codes, cfg.sharpness, cfg.rho);
  out.loss.adv_d = adv * inv_b;
  out.loss.sparse_d = out.sparsity.value;
  out.loss.total_d = out.loss.adv_d + cfg.delta * out.loss.sparse_d;
  return out;
}

}  // namespace

LossBreakdown Sda2eModel::generator_loss(const Matrix& batch) const {
  const auto traces = forward_batch(*this, batch);
  return generator_terms(config_, batch, traces).loss;
}

LossBreakdown Sda2eModel::discriminator_loss(const Matrix& batch) const {
  const auto traces = forward_batch(*this, batch);
  return discriminator_terms(config_, traces).loss;
}

LossBreakdown Sda2eModel::accumulate_generator_grads(const Matrix& batch) {
  auto traces = forward_batch(*this, batch);
  return generator_backward(batch, traces);
}

LossBreakdown Sda2eModel::accumulate_generator_grads(
    const Matrix& batch, std::vector<ForwardTrace>& traces) {
  if (traces.size() != batch.rows()) {
    throw DimensionError("trace count does not match batch");
  }
  // G and A are unchanged since the traces were taken; only D moved.
  for (std::size_t i = 0; i < traces.size(); ++i) {
    ForwardTrace& t = traces[i];
    discriminator_.forward(t.x_hat_star, t.disc_fake);
    t.e_fake = mse(t.x_hat(), t.disc_fake.output());
  }
  return generator_backward(batch, traces);
}

LossBreakdown Sda2eModel::generator_backward(
    const Matrix& batch, const std::vector<ForwardTrace>& traces) {
  const auto terms = generator_terms(config_, batch, traces);
  const Sda2eConfig& cfg = config_;
  const std::size_t d = cfg.d;
  const std::size_t k = cfg.k;
  const double inv_b = 1.0 / static_cast<double>(batch.rows());

  std::vector<double> up_xhat(d), up_yf(d), g_star(d), up_ahat(d), g_xstar(d),
      up_a(d), dz(k);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const ForwardTrace& t = traces[i];
    auto x = batch.row(i);
    auto x_hat = t.x_hat();
    auto y_fake = t.disc_fake.output();

    // Reconstruction term and the direct part of E_fake.
    for (std::size_t j = 0; j < d; ++j) {
      const double r = x_hat[j] - y_fake[j];
      up_xhat[j] = 2.0 * inv_b * (x_hat[j] - x[j]) + cfg.alpha * inv_b * 2.0 * r;
      up_yf[j] = -cfg.alpha * inv_b * 2.0 * r;
    }
    // E_fake through D(x_hat * A(x_hat)).
    discriminator_.backward(t.disc_fake, up_yf, {}, g_star, false);
    auto a_hat = t.mask_hat();
    for (std::size_t j = 0; j < d; ++j) {
      up_xhat[j] += g_star[j] * a_hat[j];
      up_ahat[j] = g_star[j] * x_hat[j];
    }
    attention_.backward(t.attn_fake, up_ahat, up_xhat);

    // Sparsity on z_G.
    auto z = t.z_g();
    for (std::size_t j = 0; j < k; ++j) {
      dz[j] = cfg.beta * terms.sparsity.slope[j] * inv_b *
              surrogate_slope(z[j], cfg.sharpness);
    }
    generator_.backward(t.gen, up_xhat, dz, g_xstar);

    // x* = x * a, plus the L1 attention penalty (a > 0).
    for (std::size_t j = 0; j < d; ++j) {
      up_a[j] = g_xstar[j] * x[j] + cfg.gamma * cfg.lambda * inv_b;
    }
    attention_.backward(t.attn_real, up_a, {});
  }
  return terms.loss;
}

LossBreakdown Sda2eModel::accumulate_discriminator_grads(const Matrix& batch) {
  std::vector<ForwardTrace> traces;
  return accumulate_discriminator_grads(batch, traces);
}

LossBreakdown Sda2eModel::accumulate_discriminator_grads(
    const Matrix& batch, std::vector<ForwardTrace>& traces) {
  if (batch.rows() == 0) throw DimensionError("empty batch");
  traces.resize(batch.rows());
  for (std::size_t i = 0; i < batch.rows(); ++i) forward(batch.row(i), traces[i]);
  const auto terms = discriminator_terms(config_, traces);
  const Sda2eConfig& cfg = config_;
  const std::size_t d = cfg.d;
  const std::size_t k = cfg.k;
  const double inv_b = 1.0 / static_cast<double>(batch.rows());
  // rho_hat_D pools real and fake codes, 2B codes in total.
  const double inv_pool = 0.5 * inv_b;

  std::vector<double> up(d), dz(k);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const ForwardTrace& t = traces[i];
    auto x = batch.row(i);

    auto y_real = t.disc_real.output();
    for (std::size_t j = 0; j < d; ++j) up[j] = -2.0 * inv_b * (x[j] - y_real[j]);
    auto zr = t.disc_real.latent();
    for (std::size_t j = 0; j < k; ++j) {
      dz[j] = cfg.delta * terms.sparsity.slope[j] * inv_pool *
              surrogate_slope(zr[j], cfg.sharpness);
    }
    discriminator_.backward(t.disc_real, up, dz, {});

    auto x_hat = t.x_hat();
    auto y_fake = t.disc_fake.output();
    const bool hinge_active = t.e_fake < cfg.margin;
    for (std::size_t j = 0; j < d; ++j) {
      up[j] = hinge_active ? 2.0 * inv_b * (x_hat[j] - y_fake[j]) : 0.0;
    }
    auto zf = t.disc_fake.latent();
    for (std::size_t j = 0; j < k; ++j) {
      dz[j] = cfg.delta * terms.sparsity.slope[j] * inv_pool *
              surrogate_slope(zf[j], cfg.sharpness);
    }
    discriminator_.backward(t.disc_fake, up, dz, {});
  }
  return terms.loss;
}

ParamList Sda2eModel::generator_params() {
  ParamList out;
  generator_.collect(out);
  return out;
}

ParamList Sda2eModel::discriminator_params() {
  ParamList out;
  discriminator_.collect(out);
  return out;
}

ParamList Sda2eModel::attention_params() {
  ParamList out;
  attention_.collect(out);
  return out;
}

ParamList Sda2eModel::all_params() {
  ParamList out = attention_params();
  generator_.collect(out);
  discriminator_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const Matrix& data, const Sda2eConfig& config,
                  const TrainOptions& options) {
  TrainResult result{Sda2eModel(config), {}};
  result.history =
      train_in_place(result.model, data, result.model.config().epochs,
                     derive_seed(result.model.config().seed, "shuffle"),
                     options);
  return result;
}

std::vector<EpochStats> train_in_place(Sda2eModel& model, const Matrix& data,
                                       std::size_t epochs,
                                       std::uint64_t shuffle_seed,
                                       const TrainOptions& options) {
  const Sda2eConfig& cfg = model.config();
  if (data.rows() == 0) throw TrainingError("train: empty dataset");
  if (data.cols() != cfg.d) {
    throw DimensionError("train: data width " + std::to_string(data.cols()) +
                         " != d " + std::to_string(cfg.d));
  }
  Optimizer opt_d(cfg.optimizer, cfg.lr_d, model.discriminator_params());
  Optimizer opt_g(cfg.optimizer, cfg.lr_g, model.generator_params());
  Optimizer opt_a(cfg.optimizer, cfg.lr_a, model.attention_params());

  Rng rng(shuffle_seed);
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bsz = std::min(cfg.batch_size, data.rows());
  Matrix batch;
  std::vector<ForwardTrace> traces;

  std::vector<EpochStats> history;
  history.reserve(epochs);
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    EpochStats stats;
    stats.epoch = epoch;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += bsz, ++batch_index) {
      const std::size_t rows = std::min(bsz, order.size() - start);
      if (batch.rows() != rows) batch = Matrix(rows, cfg.d);
      for (std::size_t r = 0; r < rows; ++r) {
        auto src = data.row(order[start + r]);
        std::copy(src.begin(), src.end(), batch.row(r).begin());
      }
      try {
        opt_d.zero_grad();
        const LossBreakdown ld =
            model.accumulate_discriminator_grads(batch, traces);
        if (!finite(ld)) throw TrainingError("non-finite discriminator loss");
        opt_d.step();

        opt_g.zero_grad();
        opt_a.zero_grad();
        const LossBreakdown lg = model.accumulate_generator_grads(batch, traces);
        if (!finite(lg)) throw TrainingError("non-finite generator loss");
        opt_g.step();
        opt_a.step();

        const double w = static_cast<double>(rows);
        auto& m = stats.mean;
        m.recon_g += w * lg.recon_g;
        m.adv_g += w * lg.adv_g;
        m.sparse_g += w * lg.sparse_g;
        m.attn += w * lg.attn;
        m.total_g += w * lg.total_g;
        m.adv_d += w * ld.adv_d;
        m.sparse_d += w * ld.sparse_d;
        m.total_d += w * ld.total_d;
      } catch (const TrainingError& e) {
        std::ostringstream msg;
        msg << e.what() << " (epoch " << epoch << ", batch " << batch_index
            << ")";
        throw TrainingError(msg.str());
      }
    }
    const double inv = 1.0 / static_cast<double>(order.size());
    auto& m = stats.mean;
    for (double* v : {&m.recon_g, &m.adv_g, &m.sparse_g, &m.attn, &m.total_g,
                      &m.adv_d, &m.sparse_d, &m.total_d}) {
      *v *= inv;
    }
    history.push_back(stats);
    if (options.on_epoch) options.on_epoch(model, stats);
  }
  return history;
}

}  // namespace sda2e

namespace sda2e {
namespace {

void push_relu_states(const Mlp::Trace& trace, std::vector<std::uint8_t>& out) {
  for (const auto& layer : trace) {
    for (double v : layer.output) out.push_back(v > 0.0 ? 1 : 0);
  }
}

void push_clamp_states(std::span<const double> values,
                       std::vector<std::uint8_t>& out) {
  for (double v : values) {
    out.push_back(v <= kSigmoidFloor ? 0 : (v >= kSigmoidCeil ? 2 : 1));
  }
}

void push_frequency_states(const std::vector<std::span<const double>>& codes,
                           double c, std::vector<std::uint8_t>& out) {
  const std::size_t k = codes.front().size();
  for (std::size_t j = 0; j < k; ++j) {
    double raw = 0.0;
    for (const auto& z : codes) raw += 1.0 - std::exp(-z[j] / c);
    raw /= static_cast<double>(codes.size());
    out.push_back(raw < kRhoHatFloor ? 0 : (raw > kRhoHatCeil ? 2 : 1));
  }
}

}  // namespace

std::vector<std::uint8_t> activation_pattern(const Sda2eModel& model,
                                             const Matrix& batch) {
  std::vector<std::uint8_t> out;
  std::vector<std::span<const double>> gen_codes, disc_codes;
  std::vector<ForwardTrace> traces(batch.rows());
  const double c = model.config().sharpness;
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    ForwardTrace& t = traces[i];
    model.forward(batch.row(i), t);
    push_clamp_states(t.mask(), out);
    push_clamp_states(t.mask_hat(), out);
    for (const auto* ae : {&t.gen, &t.disc_real, &t.disc_fake}) {
      push_relu_states(ae->encoder, out);
      Mlp::Trace hidden(ae->decoder.begin(), ae->decoder.end() - 1);
      push_relu_states(hidden, out);
      push_clamp_states(ae->output(), out);
    }
    out.push_back(t.e_fake < model.config().margin ? 1 : 0);
    gen_codes.push_back(t.z_g());
    disc_codes.push_back(t.disc_real.latent());
    disc_codes.push_back(t.disc_fake.latent());
  }
  if (!traces.empty()) {
    push_frequency_states(gen_codes, c, out);
    push_frequency_states(disc_codes, c, out);
  }
  return out;
}

}  // namespace sda2e

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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "sda2e/error.hpp"
#include "sda2e/rng.hpp"

namespace sda2e {
namespace {

Matrix random_batch(Rng& rng, std::size_t b, std::size_t d, double p) {
  Matrix m(b, d);
  for (double& v : m.values()) v = rng.bernoulli(p) ? 1.0 : 0.0;
  return m;
}

double kl_oracle(const std::vector<double>& rho_hat, double rho) {
  double s = 0;
  for (double p : rho_hat) {
    s += p * std::log(p / rho) + (1 - p) * std::log((1 - p) / (1 - rho));
  }
  return s;
}

std::vector<double> smooth_freq(const std::vector<std::vector<double>>& codes,
                                double c) {
  std::vector<double> f(codes.front().size(), 0.0);
  for (const auto& z : codes) {
    for (std::size_t j = 0; j < z.size(); ++j) f[j] += 1 - std::exp(-z[j] / c);
  }
  for (double& v : f) {
    v = std::clamp(v / static_cast<double>(codes.size()), kRhoHatFloor,
                   kRhoHatCeil);
  }
  return f;
}

struct GradCase {
  Sda2eConfig config;
  Matrix batch;
};

GradCase small_case(std::uint64_t seed, AttentionMode mode) {
  Rng rng(seed);
  GradCase c;
  c.config.d = 4 + rng.below(13);
  c.config.k = 1 + rng.below(4);
  if (c.config.k >= c.config.d) c.config.k = c.config.d - 1;
  c.config.hidden = {c.config.k + 1 + rng.below(4)};
  c.config.seed = seed;
  c.config.attention_mode = mode;
  c.config.attention_rank = 3;
  c.batch = random_batch(rng, 1 + rng.below(8), c.config.d, 0.4);
  return c;
}

double grad_error(Sda2eModel& m, const Matrix& batch, bool generator) {
  ParamList params;
  if (generator) {
    params = m.generator_params();
    for (auto* p : m.attention_params()) params.push_back(p);
  } else {
    params = m.discriminator_params();
  }
  for (auto* p : m.all_params()) p->zero_grad();
  if (generator) {
    m.accumulate_generator_grads(batch);
  } else {
    m.accumulate_discriminator_grads(batch);
  }
  std::vector<Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  const auto base = activation_pattern(m, batch);
  KinkMask mask;
  const auto numeric = finite_difference_grad(
      [&] {
        return generator ? m.generator_loss(batch).total_g
                         : m.discriminator_loss(batch).total_d;
      },
      params, 1e-4, [&] { return activation_pattern(m, batch) == base; },
      &mask, FdStencil::kFourPoint);
  double worst = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    worst = std::max(worst, max_relative_error(analytic[i], numeric[i], 1e-6,
                                               mask.kinked[i]));
  }
  return worst;
}

TEST(Config, ResolvesDefaultsFromWidth) {
  Sda2eConfig c;
  c.d = 64;
  const auto r = c.resolved();
  EXPECT_EQ(r.k, default_latent_dim(64));
  ASSERT_EQ(r.hidden.size(), 1u);
  EXPECT_EQ(r.hidden[0], std::max<std::size_t>(r.k, 32));
  EXPECT_EQ(r.attention_mode, AttentionMode::kDense);
  c.d = 4096;
  EXPECT_EQ(c.resolved().attention_mode, AttentionMode::kLowRank);
}

TEST(Config, LatentWiderThanInputIsRejectedByName) {
  Sda2eConfig c;
  c.d = 8;
  c.k = 8;
  try {
    c.resolved().validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("k < d"), std::string::npos);
  }
  c.k = 2;
  c.rho = 1.0;
  EXPECT_THROW(c.resolved().validate(), ConfigError);
}

TEST(Sparsity, KlMatchesFormulaAndVanishesAtTarget) {
  const std::vector<double> rh{0.1, 0.3, 0.05};
  EXPECT_NEAR(kl_sparsity(rh, 0.1), kl_oracle(rh, 0.1), 1e-15);
  EXPECT_EQ(kl_sparsity(std::vector<double>{0.2, 0.2}, 0.2), 0.0);
  EXPECT_THROW(kl_sparsity(rh, 0.0), ConfigError);
  const double p = 0.3, h = 1e-6;
  const double fd = (kl_oracle({p + h}, 0.1) - kl_oracle({p - h}, 0.1)) / (2 * h);
  EXPECT_NEAR(kl_sparsity_derivative(p, 0.1), fd, 1e-8);
}

TEST(Sparsity, ActivationFrequencies) {
  Matrix z(4, 2);
  z(0, 0) = 0.0;
  z(1, 0) = 0.5;
  z(2, 0) = 0.0;
  z(3, 0) = 2.0;
  const auto ind = indicator_activation(z);
  EXPECT_DOUBLE_EQ(ind[0], 0.5);
  EXPECT_DOUBLE_EQ(ind[1], 0.0);
  const auto smooth = empirical_activation(z, 0.5);
  EXPECT_NEAR(smooth[0], ((1 - std::exp(-1.0)) + (1 - std::exp(-4.0))) / 4,
              1e-15);
  EXPECT_EQ(smooth[1], kRhoHatFloor);
}

TEST(Model, ScoreIsSquaredReconstructionError) {
  Sda2eConfig c;
  c.d = 10;
  c.k = 3;
  c.seed = 4;
  Sda2eModel m(c);
  Rng rng(1);
  const Matrix batch = random_batch(rng, 5, 10, 0.3);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto t = m.forward(batch.row(i));
    double e = 0;
    for (std::size_t j = 0; j < 10; ++j) {
      EXPECT_EQ(t.x_star[j], batch(i, j) * t.mask()[j]);
      e += (batch(i, j) - t.x_hat()[j]) * (batch(i, j) - t.x_hat()[j]);
    }
    EXPECT_EQ(m.anomaly_score(batch.row(i)), e);
    for (double a : t.mask()) {
      EXPECT_GT(a, 0.0);
      EXPECT_LT(a, 1.0);
    }
    for (double z : t.z_g()) EXPECT_GE(z, 0.0);
  }
}

TEST(Model, LossesMatchTermByTermOracle) {
  Sda2eConfig c;
  c.d = 12;
  c.k = 3;
  c.seed = 8;
  c.alpha = 0.7;
  c.beta = 1.3;
  c.gamma = 0.4;
  c.delta = 0.6;
  c.lambda = 0.2;
  c.margin = 2.0;
  Sda2eModel m(c);
  Rng rng(3);
  const Matrix batch = random_batch(rng, 6, 12, 0.35);
  const double b = 6;
  double recon = 0, adv_g = 0, l1 = 0, hinge = 0;
  std::vector<std::vector<double>> zg, zd;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto t = m.forward(batch.row(i));
    recon += mse(batch.row(i), t.x_hat());
    const auto [er, ef] = m.discriminator_energies(batch.row(i), t.x_hat());
    adv_g += ef;
    hinge += er + std::max(0.0, c.margin - ef);
    for (double a : t.mask()) l1 += std::abs(a);
    zg.emplace_back(t.z_g().begin(), t.z_g().end());
    zd.emplace_back(t.disc_real.latent().begin(), t.disc_real.latent().end());
    zd.emplace_back(t.disc_fake.latent().begin(), t.disc_fake.latent().end());
  }
  const double kl_g = kl_oracle(smooth_freq(zg, c.sharpness), c.rho);
  const double kl_d = kl_oracle(smooth_freq(zd, c.sharpness), c.rho);
  const double lg = recon / b + c.alpha * adv_g / b + c.beta * kl_g +
                    c.gamma * (c.lambda / b) * l1;
  const double ld = hinge / b + c.delta * kl_d;
  const auto g = m.generator_loss(batch);
  const auto d = m.discriminator_loss(batch);
  EXPECT_NEAR(g.total_g, lg, 1e-12 * std::abs(lg));
  EXPECT_NEAR(d.total_d, ld, 1e-12 * std::abs(ld));
  EXPECT_NEAR(g.recon_g, recon / b, 1e-13);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, DenseAttention) {
  auto gc = small_case(GetParam(), AttentionMode::kDense);
  Sda2eModel m(gc.config);
  EXPECT_LE(grad_error(m, gc.batch, true), 1e-4);
  EXPECT_LE(grad_error(m, gc.batch, false), 1e-4);
}

TEST_P(GradientCheck, LowRankAttention) {
  auto gc = small_case(100 + GetParam(), AttentionMode::kLowRank);
  Sda2eModel m(gc.config);
  EXPECT_LE(grad_error(m, gc.batch, true), 1e-4);
  EXPECT_LE(grad_error(m, gc.batch, false), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientCheck, ::testing::Range(0, 5));

TEST(Model, TraceReuseGivesIdenticalGradients) {
  Sda2eConfig c;
  c.d = 20;
  c.k = 4;
  c.seed = 12;
  Rng rng(6);
  const Matrix batch = random_batch(rng, 8, 20, 0.3);
  Sda2eModel a(c), b(c);

  std::vector<ForwardTrace> traces;
  for (auto* p : a.all_params()) p->zero_grad();
  a.accumulate_discriminator_grads(batch, traces);
  // Move D so the reused traces hold a stale D(x_hat*), as in training.
  for (auto* p : a.discriminator_params()) {
    for (double& v : p->value.values()) v += 0.01;
  }
  for (auto* p : b.discriminator_params()) {
    for (double& v : p->value.values()) v += 0.01;
  }
  for (auto* p : a.all_params()) p->zero_grad();
  for (auto* p : b.all_params()) p->zero_grad();
  const auto la = a.accumulate_generator_grads(batch, traces);
  const auto lb = b.accumulate_generator_grads(batch);
  EXPECT_EQ(la.total_g, lb.total_g);
  const auto pa = a.all_params();
  const auto pb = b.all_params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->grad, pb[i]->grad) << pa[i]->name;
  }
}

TEST(Train, DeterministicFiniteAndImproving) {
  Rng rng(2);
  Matrix data(120, 16);
  for (std::size_t i = 0; i < 120; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      data(i, j) = ((i % 3 == j % 3) ^ rng.bernoulli(0.05)) ? 1.0 : 0.0;
    }
  }
  Sda2eConfig c;
  c.d = 16;
  c.k = 3;
  c.epochs = 30;
  c.seed = 5;
  c.lr_g = c.lr_d = c.lr_a = 1e-2;
  c.beta = 0.1;
  const auto r1 = train(data, c);
  const auto r2 = train(data, c);
  ASSERT_EQ(r1.history.size(), 30u);
  for (std::size_t e = 0; e < 30; ++e) {
    EXPECT_EQ(r1.history[e].mean.total_g, r2.history[e].mean.total_g);
    EXPECT_TRUE(std::isfinite(r1.history[e].mean.total_g));
    EXPECT_TRUE(std::isfinite(r1.history[e].mean.total_d));
  }
  EXPECT_LT(r1.history.back().mean.recon_g,
            0.5 * r1.history.front().mean.recon_g);
}

TEST(Train, EmptyDataIsAnError) {
  Sda2eConfig c;
  c.d = 4;
  c.k = 2;
  EXPECT_THROW(train(Matrix(0, 4), c), TrainingError);
}

TEST(Train, EpochHookSeesEveryEpoch) {
  Matrix data(10, 6, 0.0);
  for (std::size_t i = 0; i < 10; ++i) data(i, i % 6) = 1.0;
  Sda2eConfig c;
  c.d = 6;
  c.k = 2;
  c.epochs = 4;
  std::vector<std::size_t> seen;
  TrainOptions o;
  o.on_epoch = [&](const Sda2eModel&, const EpochStats& s) {
    seen.push_back(s.epoch);
  };
  train(data, c, o);
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3, 4}));
}

}  // namespace
}  // namespace sda2e

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "embryoforge/autograd.hpp"
#include "embryoforge/gan.hpp"
#include "embryoforge/ops.hpp"
#include "embryoforge/synth.hpp"
#include "oracles.hpp"

using namespace embryoforge;

namespace {

LayerSpec layer(LayerKind kind, std::string name, std::int64_t units = 0) {
  LayerSpec s;
  s.kind = kind;
  s.name = std::move(name);
  s.units = units;
  return s;
}

Tensor column(std::vector<double> v) {
  const auto n = static_cast<std::int64_t>(v.size());
  return Tensor::from_vector({n, 1}, std::move(v));
}

/// conv 4x4/2 -> leaky -> conv 4x4/2 -> leaky -> dense(1) on 1x4x4 inputs.
Network two_conv_critic(Rng& rng) {
  auto c1 = layer(LayerKind::conv, "conv1", 3);
  auto c2 = layer(LayerKind::conv, "conv2", 2);
  return Network({1, 4, 4},
                 {c1, layer(LayerKind::leaky_relu, "act1"), c2, layer(LayerKind::leaky_relu, "act2"),
                  layer(LayerKind::flatten, "flat"), layer(LayerKind::dense, "fc", 1)},
                 rng, DType::f64);
}

Network toy_mlp(std::int64_t in, Rng& rng) { return build_mlp(in, {6}, 1, rng, DType::f64); }

BatchSource gaussian_source(double mean, double stddev) {
  return [=](std::int64_t n, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.normal(mean, stddev);
    return column(std::move(v));
  };
}

TrainConfig tiny_gan_config() {
  TrainConfig cfg;
  cfg.latent_dim = 3;
  cfg.batch_size = 8;
  cfg.n_critic = 2;
  cfg.dtype = DType::f64;
  cfg.seed = 21;
  return cfg;
}

GanTrainer tiny_trainer(const TrainConfig& cfg) {
  Rng init(derive_seed(cfg.seed, streams::kInit));
  Network g = toy_mlp(cfg.latent_dim, init);
  Network d = toy_mlp(1, init);
  return GanTrainer(std::move(g), std::move(d), cfg);
}

}  // namespace

TEST(Minimax, EquilibriumIsMinusTwoLogTwo) {
  const Tensor half = Tensor::full({16, 1}, 0.5);
  const auto m = minimax_loss(half, half);
  EXPECT_NEAR(m.objective, -2.0 * std::numbers::ln2, 1e-12);
  EXPECT_NEAR(m.d_loss.item(), 2.0 * std::numbers::ln2, 1e-12);
}

TEST(Minimax, PerfectDiscriminatorLossNearZero) {
  const auto m = minimax_loss(Tensor::full({4, 1}, 1.0), Tensor::full({4, 1}, 1e-7));
  EXPECT_NEAR(m.d_loss.item(), 0.0, 1e-6);
}

TEST(Minimax, MatchesNaiveSummation) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(40));
    std::vector<double> r(n), f(n);
    for (auto& v : r) v = rng.uniform(0.01, 0.99);
    for (auto& v : f) v = rng.uniform(0.01, 0.99);
    double sr = 0, sf = 0, sg = 0, sl = 0;
    for (int i = 0; i < n; ++i) {
      sr += std::log(r[i]);
      sf += std::log(1 - f[i]);
      sg += std::log(f[i]);
    }
    sl = sf;
    const auto m = minimax_loss(column(r), column(f));
    EXPECT_NEAR(m.d_loss.item(), -sr / n - sf / n, 1e-12);
    EXPECT_NEAR(m.g_loss.item(), -sg / n, 1e-12);
    EXPECT_NEAR(minimax_loss(column(r), column(f), true).g_loss.item(), sl / n, 1e-12);
  }
}

TEST(Minimax, RejectsNonProbabilities) {
  EXPECT_THROW(minimax_loss(column({0.5, 1.3}), column({0.5, 0.5})), std::invalid_argument);
  EXPECT_THROW(minimax_loss(column({0.5}), column({-0.2})), std::invalid_argument);
  EXPECT_NO_THROW(minimax_loss(column({1.0 + 5e-8}), column({-5e-8})));
}

TEST(Wasserstein, ArithmeticAndTranslationInvariance) {
  const auto w = wasserstein_objective(column({0.5, 1.5}), column({0.1, 0.3}), Tensor::scalar(0.0));
  EXPECT_NEAR(w.estimate, 0.8, 1e-15);
  EXPECT_NEAR(w.critic_loss.item(), -0.8, 1e-15);
  EXPECT_NEAR(w.gen_loss.item(), -0.2, 1e-15);
  const auto same = wasserstein_objective(column({0.4, 0.9}), column({0.4, 0.9}), Tensor::scalar(3.0));
  EXPECT_EQ(same.estimate, 0.0);
  Rng rng(1);
  const Tensor r = oracle::random_tensor({7, 1}, rng), f = oracle::random_tensor({7, 1}, rng);
  const auto base = wasserstein_objective(r, f, {});
  const auto shifted = wasserstein_objective(r + 12.5, f + 12.5, {});
  EXPECT_NEAR(base.critic_loss.item(), shifted.critic_loss.item(), 1e-12);
  EXPECT_THROW(wasserstein_objective(column({NAN}), column({0.0}), {}), std::invalid_argument);
}

TEST(Wasserstein, GeneratorGradientTranslationInvariant) {
  Rng rng(4);
  Network g = build_mlp(2, {5}, 1, rng);
  Network d = toy_mlp(1, rng);
  const Tensor z = oracle::random_tensor({6, 2}, rng);
  auto gen_grads = [&](double c) {
    const Tensor scores = d.forward(g.forward(z, NormMode::train), NormMode::train) + c;
    return grad(wasserstein_objective(scores, scores.detach(), {}).gen_loss, g.params().tensors());
  };
  const auto a = gen_grads(0.0), b = gen_grads(-40.0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].to_vector(), b[i].to_vector());
}

TEST(Penalty, UnitGradientLinearCriticGivesZero) {
  Rng rng(2);
  Network critic({1, 2, 2}, {layer(LayerKind::flatten, "flat"), layer(LayerKind::dense, "fc", 1)}, rng,
                 DType::f64);
  for (const auto& w : std::vector<std::vector<double>>{
           {0.5, 0.5, 0.5, 0.5}, {1, 0, 0, 0}, {0, -0.6, 0.8, 0}, {-0.5, 0.5, -0.5, 0.5}}) {
    critic.params().set("fc.weight", Tensor::from_vector({4, 1}, w));
    const Tensor real = oracle::random_tensor({5, 1, 2, 2}, rng);
    const Tensor fake = oracle::random_tensor({5, 1, 2, 2}, rng);
    const auto p = gradient_penalty(critic, real, fake, 10.0, rng);
    EXPECT_EQ(p.penalty.item(), 0.0);
    EXPECT_GE(p.penalty.item(), 0.0);
  }
}

TEST(Penalty, DoubleSlopeCriticGivesLambda) {
  CriticFn d = [](const Tensor& x) { return x * 2.0; };
  Rng rng(3);
  const auto p = gradient_penalty(d, oracle::random_tensor({9, 1}, rng), oracle::random_tensor({9, 1}, rng), 10.0, rng);
  EXPECT_NEAR(p.penalty.item(), 10.0, 1e-9);
  for (double n : p.grad_norms) EXPECT_NEAR(n, 2.0, 1e-12);
}

TEST(Penalty, ParameterGradientMatchesFiniteDifferences) {
  Rng rng(10);
  Network critic = two_conv_critic(rng);
  const Tensor real = oracle::random_tensor({3, 1, 4, 4}, rng);
  const Tensor fake = oracle::random_tensor({3, 1, 4, 4}, rng);
  auto penalty = [&] {
    Rng eps(99);
    return gradient_penalty(critic, real, fake, 10.0, eps).penalty;
  };
  const auto analytic = grad(penalty(), critic.params().tensors());
  double worst = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    Tensor p = critic.params().entries()[i].second;
    auto data = p.mutable_data<double>();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double orig = data[j];
      const double h = 1e-6;
      data[j] = orig + h;
      const double up = penalty().item();
      data[j] = orig - h;
      const double down = penalty().item();
      data[j] = orig;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(analytic[i].value(static_cast<std::int64_t>(j)) - fd) /
                                  std::max(1.0, std::abs(fd)));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Penalty, BatchCouplingRejected) {
  Rng rng(1);
  NetworkConfig cfg;
  cfg.input_size = 16;
  cfg.base_filters = 2;
  cfg.hidden_units = 4;
  cfg.critic_norm = CriticNorm::batch_norm;
  Network critic = build_critic(cfg, rng, DType::f64);
  const Tensor x = oracle::random_tensor({2, 1, 16, 16}, rng);
  try {
    gradient_penalty(critic, x, x, 10.0, rng);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("batch coupling"), std::string::npos);
  }
}

TEST(Trace, CsvRoundtripAndValidation) {
  LossTrace t;
  t.append({1, 0.1, -0.25, 3.0, 12.5});
  t.append({2, 1.0 / 3.0, 2e-17, 0.0, 13.0});
  const auto csv = t.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,critic_obj,gen_obj,penalty,wall_ms");
  const auto back = LossTrace::from_csv(csv);
  EXPECT_TRUE(back.same_values(t));
  EXPECT_EQ(back.to_csv(), csv);
  EXPECT_THROW(t.append({2, 0, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(t.append({3, NAN, 0, 0, 0}), std::invalid_argument);
}

TEST(GanLoop, ZeroIterationsReturnsInitialState) {
  const auto cfg = tiny_gan_config();
  auto t = tiny_trainer(cfg);
  Rng init(derive_seed(cfg.seed, streams::kInit));
  Network g0 = toy_mlp(cfg.latent_dim, init);
  t.run(0, gaussian_source(3, 0.5));
  EXPECT_TRUE(t.trace().empty());
  EXPECT_EQ(t.generator().params().at("out.weight").to_vector(), g0.params().at("out.weight").to_vector());
}

TEST(GanLoop, SeededRunsAreBitIdentical) {
  const auto cfg = tiny_gan_config();
  auto a = tiny_trainer(cfg);
  auto b = tiny_trainer(cfg);
  a.run(25, gaussian_source(3, 0.5));
  b.run(25, gaussian_source(3, 0.5));
  ASSERT_EQ(a.trace().size(), 25u);
  EXPECT_TRUE(a.trace().same_values(b.trace()));
  EXPECT_EQ(a.trace().rows().front().iter, 1);
  auto c_cfg = cfg;
  c_cfg.seed = 22;
  auto c = tiny_trainer(c_cfg);
  c.run(25, gaussian_source(3, 0.5));
  EXPECT_FALSE(a.trace().same_values(c.trace()));
}

TEST(GanLoop, ResumeReproducesUninterruptedTrace) {
  const auto cfg = tiny_gan_config();
  auto full = tiny_trainer(cfg);
  full.run(30, gaussian_source(3, 0.5));

  auto first = tiny_trainer(cfg);
  first.run(12, gaussian_source(3, 0.5));
  const auto g_bytes = encode_checkpoint(first.generator_checkpoint());
  const auto c_bytes = encode_checkpoint(first.critic_checkpoint());
  auto resumed = GanTrainer::resume(decode_checkpoint(g_bytes), decode_checkpoint(c_bytes), cfg);
  EXPECT_EQ(resumed.iteration(), 12);
  resumed.run(30, gaussian_source(3, 0.5));
  EXPECT_TRUE(resumed.trace().same_values(full.trace()));
}

TEST(GanLoop, NumericalFailureKeepsLastGoodState) {
  const auto cfg = tiny_gan_config();
  auto t = tiny_trainer(cfg);
  t.run(5, gaussian_source(3, 0.5));
  const auto before = encode_checkpoint(t.generator_checkpoint());
  BatchSource poisoned = [](std::int64_t n, Rng&) { return Tensor::full({n, 1}, NAN); };
  try {
    t.run(10, poisoned);
    FAIL();
  } catch (const NumericalFailure& e) {
    EXPECT_EQ(e.iteration(), 6);
  }
  EXPECT_EQ(t.iteration(), 5);
  EXPECT_EQ(encode_checkpoint(t.generator_checkpoint()), before);
}

TEST(GanLoop, SampleHookCadence) {
  auto cfg = tiny_gan_config();
  cfg.sample_every = 4;
  cfg.sample_grid = 2;
  auto t = tiny_trainer(cfg);
  std::vector<std::int64_t> seen;
  GanTrainer::Hooks hooks;
  hooks.on_samples = [&](std::int64_t it, const Tensor& s) {
    seen.push_back(it);
    EXPECT_EQ(s.shape(), (Shape{4, 1}));
  };
  t.run(9, gaussian_source(0, 1), hooks);
  EXPECT_EQ(seen, (std::vector<std::int64_t>{4, 8}));
}

TEST(GanLoop, MinimaxVariantRuns) {
  auto cfg = tiny_gan_config();
  cfg.loss_kind = LossKind::minimax;
  auto t = tiny_trainer(cfg);
  t.run(5, gaussian_source(3, 0.5));
  for (const auto& r : t.trace().rows()) {
    EXPECT_LT(r.critic_obj, 0.0);  // sum of two log-probabilities
    EXPECT_EQ(r.penalty, 0.0);
  }
}

TEST(Classifier, AccuracyMatchesCountingOracle) {
  Rng rng(6);
  const Tensor logits = oracle::random_tensor({50, 3}, rng);
  std::vector<int> labels(50);
  for (auto& l : labels) l = static_cast<int>(rng.below(3));
  const auto v = logits.to_vector();
  int hits = 0;
  for (int i = 0; i < 50; ++i) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (v[i * 3 + k] > v[i * 3 + best]) best = k;
    hits += best == labels[i];
  }
  EXPECT_EQ(accuracy(logits, labels), hits / 50.0);
}

TEST(Classifier, SingleClassAndEmptySplit) {
  Rng rng(7);
  std::vector<Patch> ones;
  for (int i = 0; i < 12; ++i) ones.push_back(synth_labeled_patch(16, 0, rng));
  NetworkConfig nc;
  nc.input_size = 16;
  nc.base_filters = 2;
  nc.hidden_units = 8;
  Rng init(1);
  Network net = build_classifier(nc, 2, init);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 4;
  cfg.lr_classifier = 1e-2;
  const auto hist = train_classifier(net, ones, ones, cfg);
  ASSERT_EQ(hist.size(), 8u);
  EXPECT_EQ(hist.back().train_accuracy, 1.0);
  EXPECT_EQ(hist.back().test_accuracy, 1.0);
  EXPECT_THROW(train_classifier(net, {}, ones, cfg), std::invalid_argument);
  EXPECT_THROW(train_classifier(net, ones, {}, cfg), std::invalid_argument);
}

TEST(Config, Invariants) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.batch_size, 32);
  EXPECT_EQ(cfg.lr_classifier, 1e-5);
  EXPECT_EQ(cfg.lr_gan, 1e-4);
  EXPECT_EQ(cfg.n_critic, 5);
  EXPECT_EQ(cfg.penalty_weight, 10.0);
  EXPECT_EQ(cfg.latent_dim, 128);
  cfg.n_critic = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.batch_size = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.penalty_weight = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

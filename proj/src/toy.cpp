#include "embryoforge/toy.hpp"

#include <cmath>
#include <stdexcept>

namespace embryoforge {

void ToyConfig::validate() const {
  if (!(stddev > 0) || !std::isfinite(mean)) throw std::invalid_argument("toy target needs finite mean and stddev > 0");
  if (latent_dim < 1) throw std::invalid_argument("toy latent_dim must be >= 1");
  for (auto h : generator_hidden)
    if (h < 1) throw std::invalid_argument("toy layer widths must be positive");
  for (auto h : critic_hidden)
    if (h < 1) throw std::invalid_argument("toy layer widths must be positive");
}

Network toy_generator(const ToyConfig& cfg, Rng& rng, DType dtype) {
  cfg.validate();
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < cfg.generator_hidden.size(); ++i) {
    LayerSpec fc;
    fc.kind = LayerKind::dense;
    fc.name = "fc" + std::to_string(i + 1);
    fc.units = cfg.generator_hidden[i];
    layers.push_back(fc);
    LayerSpec act;
    act.kind = LayerKind::tanh;
    act.name = "act" + std::to_string(i + 1);
    layers.push_back(act);
  }
  LayerSpec out;
  out.kind = LayerKind::dense;
  out.name = "out";
  out.units = 1;
  layers.push_back(out);
  return Network({cfg.latent_dim}, std::move(layers), rng, dtype);
}

Network toy_critic(const ToyConfig& cfg, Rng& rng, DType dtype) {
  cfg.validate();
  return build_mlp(1, cfg.critic_hidden, 1, rng, dtype);
}

BatchSource toy_source(const ToyConfig& cfg, DType dtype) {
  return [mean = cfg.mean, sd = cfg.stddev, dtype](std::int64_t n, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.normal(mean, sd);
    return Tensor::from_vector({n, 1}, std::move(v)).to(dtype);
  };
}

TrainConfig toy_train_config(const ToyConfig& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.latent_dim = cfg.latent_dim;
  t.seed = seed;
  t.dtype = DType::f64;
  t.sample_every = 0;
  return t;
}

GanTrainer make_toy_trainer(const ToyConfig& cfg, const TrainConfig& train) {
  RngStreams s(train.seed);
  Network g = toy_generator(cfg, s.stream(streams::kInit), train.dtype);
  Network d = toy_critic(cfg, s.stream(streams::kInit), train.dtype);
  return GanTrainer(std::move(g), std::move(d), train);
}

Moments sample_moments(Network& generator, int latent_dim, int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("need at least two samples for moments");
  Rng rng(seed);
  const auto z = sample_latent(n, latent_dim, rng, generator.dtype());
  const auto out = generator.forward(z, NormMode::eval).to_vector();
  double m = 0;
  for (double x : out) m += x;
  m /= static_cast<double>(out.size());
  double v = 0;
  for (double x : out) v += (x - m) * (x - m);
  v /= static_cast<double>(out.size());
  return {m, std::sqrt(v)};
}

}  // namespace embryoforge

#pragma once

#include <cstdint>
#include <vector>

#include "embryoforge/gan.hpp"

namespace embryoforge {

/// One-dimensional Gaussian target for checking the adversarial trainer
/// end to end.
struct ToyConfig {
  double mean = 3.0;
  double stddev = 0.5;
  int latent_dim = 8;
  /// Generator: dense/tanh hidden layers, linear output.
  std::vector<std::int64_t> generator_hidden{32, 32};
  /// Critic: dense/leaky_relu hidden layers, linear output.
  std::vector<std::int64_t> critic_hidden{128, 128, 128};

  void validate() const;
};

Network toy_generator(const ToyConfig& cfg, Rng& rng, DType dtype = DType::f64);
Network toy_critic(const ToyConfig& cfg, Rng& rng, DType dtype = DType::f64);

/// Fresh N(mean, stddev) batches of shape [n,1].
BatchSource toy_source(const ToyConfig& cfg, DType dtype = DType::f64);

/// Trainer defaults with the toy's latent size, f64 and no sample grids.
TrainConfig toy_train_config(const ToyConfig& cfg, std::uint64_t seed);

/// Generator and critic initialised from the "init" stream of `seed`.
GanTrainer make_toy_trainer(const ToyConfig& cfg, const TrainConfig& train);

struct Moments {
  double mean = 0;
  double stddev = 0;
};

/// Moments of n eval-mode generator samples drawn from a latent stream
/// seeded with `seed`.
Moments sample_moments(Network& generator, int latent_dim, int n, std::uint64_t seed);

}  // namespace embryoforge

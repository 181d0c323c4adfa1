#pragma once

#include <string>
#include <vector>

#include "embryoforge/layer_spec.hpp"
#include "embryoforge/nn.hpp"

namespace embryoforge {

/// A sequential network: fixed layer topology plus its parameters and
/// batch-norm running statistics.
class Network {
 public:
  Network() = default;
  Network(Shape input_shape, std::vector<LayerSpec> layers, Rng& init_rng,
          DType dtype = DType::f32);

  /// Forward pass over a batch [N, input_shape...]. Train mode uses batch
  /// statistics (and updates the running ones) and applies dropout drawn
  /// from `dropout_rng`; eval mode is deterministic.
  Tensor forward(const Tensor& x, NormMode mode, Rng* dropout_rng = nullptr);

  const Shape& input_shape() const { return input_shape_; }
  Shape output_shape() const;
  const std::vector<LayerSpec>& layers() const { return layers_; }
  DType dtype() const { return dtype_; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Batch-norm running statistics as "<layer>.running_mean/var".
  NamedTensors buffers() const;
  void set_buffers(const NamedTensors& buffers);

  /// True when a sample's output depends on other batch members.
  bool couples_batch(NormMode mode) const;

  std::int64_t parameter_count() const { return params_.total_numel(); }

  /// JSON descriptor of input shape, dtype and layers.
  std::string topology() const;
  /// Network with the given topology and freshly zeroed parameters, ready
  /// to be overwritten from a checkpoint.
  static Network from_topology(std::string_view json);

 private:
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  DType dtype_ = DType::f32;
  ParamSet params_;
  std::vector<BatchNormStats> bn_stats_;  // one per layer (unused unless batch_norm)
};

enum class CriticNorm { none, layer_norm, batch_norm };

std::string_view critic_norm_name(CriticNorm norm);
CriticNorm parse_critic_norm(std::string_view name);

struct NetworkConfig {
  int input_size = 128;
  int base_filters = 32;
  double width_scale = 1.0;
  CriticNorm critic_norm = CriticNorm::none;
  int hidden_units = 1024;
  double dropout_rate = 0.5;
  double slope = 0.2;

  /// log2(input_size) - 2 strided convolutions bring the map down to 4x4.
  int n_conv() const;
  /// Channel count of conv layer i (0-based): base * 2^i * width_scale.
  std::int64_t channels(int i) const;
  std::int64_t hidden() const;
  void validate() const;
};

/// Strided-conv classifier: n_conv x (conv 4x4/2 -> batch_norm -> leaky_relu),
/// flatten, dense -> batch_norm -> leaky_relu -> dropout, dense -> logits.
std::vector<LayerSpec> classifier_layers(const NetworkConfig& cfg, int n_classes);
Network build_classifier(const NetworkConfig& cfg, int n_classes, Rng& rng,
                         DType dtype = DType::f32);

/// Classifier topology with one unbounded output, normalization chosen by
/// cfg.critic_norm and no dropout.
std::vector<LayerSpec> critic_layers(const NetworkConfig& cfg);
Network build_critic(const NetworkConfig& cfg, Rng& rng, DType dtype = DType::f32);

/// Mirror of the critic: dense latent -> 4x4 map, n_conv transposed
/// convolutions doubling the spatial size, tanh output in [-1, 1].
std::vector<LayerSpec> generator_layers(int latent_dim, const NetworkConfig& cfg);
Network build_generator(int latent_dim, const NetworkConfig& cfg, Rng& rng,
                        DType dtype = DType::f32);

/// Fully connected net for low-dimensional toy problems: dense/leaky_relu
/// hidden layers and a linear output.
Network build_mlp(std::int64_t input_dim, const std::vector<std::int64_t>& hidden,
                  std::int64_t output_dim, Rng& rng, DType dtype = DType::f64, double slope = 0.2);

}  // namespace embryoforge

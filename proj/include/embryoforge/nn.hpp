#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "embryoforge/layer_spec.hpp"
#include "embryoforge/rng.hpp"
#include "embryoforge/tensor.hpp"

namespace embryoforge {

/// Ordered named tensors. Iteration order is insertion order.
class NamedTensors {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor tensor);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  void set(std::string_view name, Tensor tensor);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  std::int64_t total_numel() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 protected:
  std::vector<Entry> entries_;
};

/// Trainable parameters: every entry is a grad-enabled leaf.
class ParamSet : public NamedTensors {
 public:
  void add(std::string name, Tensor tensor);
  void set(std::string_view name, Tensor tensor);
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments aligned with a ParamSet's order.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState fresh(const ParamSet& params, AdamConfig config);
};

/// One bias-corrected Adam update, in place. `grads` is aligned with
/// `params`; a missing (undefined) gradient is an error.
void adam_step(ParamSet& params, std::span<const Tensor> grads, AdamState& state);

/// He-normal tensor, std = sqrt(2 / fan_in).
Tensor he_normal(const Shape& shape, std::int64_t fan_in, Rng& rng, DType dtype);

/// Parameters for a layer sequence: conv/dense weights He-normal, biases 0,
/// normalization gamma 1 and beta 0. Names are "<layer>.<role>".
ParamSet init_params(std::span<const LayerSpec> layers, const Shape& input, Rng& rng,
                     DType dtype = DType::f32);

}  // namespace embryoforge

#pragma once

#include <span>
#include <string>
#include <vector>

#include "embryoforge/ops.hpp"

namespace embryoforge {

enum class LayerKind {
  conv,
  conv_transpose,
  dense,
  batch_norm,
  layer_norm,
  leaky_relu,
  tanh,
  sigmoid,
  dropout,
  flatten,
  reshape,
};

std::string_view layer_kind_name(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

/// One layer of a sequential network. Only the fields relevant to `kind`
/// are read.
struct LayerSpec {
  LayerKind kind = LayerKind::flatten;
  std::string name;
  std::int64_t units = 0;  // output channels (conv*) or features (dense)
  int kernel = 4;
  int stride = 2;
  Padding padding = Padding::half;
  double slope = 0.2;
  double rate = 0.5;
  double eps = 1e-5;
  Shape target;  // reshape target, batch axis excluded

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Per-sample output shape of `layer` applied to per-sample `input`; throws
/// DimensionError naming the layer when they do not compose.
Shape infer_output_shape(const LayerSpec& layer, const Shape& input);

/// Per-sample shapes after each layer; element 0 is the input shape.
std::vector<Shape> infer_shapes(std::span<const LayerSpec> layers, const Shape& input);

}  // namespace embryoforge

#include "embryoforge/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "json.hpp"

namespace embryoforge {

namespace {

using json = nlohmann::ordered_json;

LayerSpec make(LayerKind kind, std::string name, std::int64_t units = 0) {
  LayerSpec s;
  s.kind = kind;
  s.name = std::move(name);
  s.units = units;
  return s;
}

LayerSpec leaky(std::string name, double slope) {
  auto s = make(LayerKind::leaky_relu, std::move(name));
  s.slope = slope;
  return s;
}

}  // namespace

Network::Network(Shape input_shape, std::vector<LayerSpec> layers, Rng& init_rng, DType dtype)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), dtype_(dtype) {
  params_ = init_params(layers_, input_shape_, init_rng, dtype_);
  const auto shapes = infer_shapes(layers_, input_shape_);
  bn_stats_.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind != LayerKind::batch_norm) continue;
    bn_stats_[i].mean = Tensor::zeros({shapes[i][0]}, dtype_);
    bn_stats_[i].var = Tensor::ones({shapes[i][0]}, dtype_);
  }
}

Shape Network::output_shape() const { return infer_shapes(layers_, input_shape_).back(); }

Tensor Network::forward(const Tensor& x, NormMode mode, Rng* dropout_rng) {
  if (x.rank() != input_shape_.size() + 1 ||
      !std::equal(input_shape_.begin(), input_shape_.end(), x.shape().begin() + 1)) {
    throw DimensionError("network expects [N]" + shape_str(input_shape_) + ", got " +
                         shape_str(x.shape()));
  }
  if (x.dtype() != dtype_) {
    throw std::invalid_argument("network dtype is " + std::string(dtype_name(dtype_)) +
                                ", input is " + std::string(dtype_name(x.dtype())));
  }
  const std::int64_t n = x.dim(0);
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    auto p = [&](const char* role) -> const Tensor& { return params_.at(layer.name + "." + role); };
    switch (layer.kind) {
      case LayerKind::conv:
        h = conv2d(h, p("kernel"), layer.stride, layer.padding) +
            reshape(p("bias"), {1, layer.units, 1, 1});
        break;
      case LayerKind::conv_transpose:
        h = conv2d_transpose(h, p("kernel"), layer.stride, layer.padding) +
            reshape(p("bias"), {1, layer.units, 1, 1});
        break;
      case LayerKind::dense:
        h = dense(h, p("weight"), p("bias"));
        break;
      case LayerKind::batch_norm:
        h = batch_norm(h, p("gamma"), p("beta"), layer.eps, mode, bn_stats_[i]);
        break;
      case LayerKind::layer_norm:
        h = layer_norm(h, p("gamma"), p("beta"), layer.eps);
        break;
      case LayerKind::leaky_relu:
        h = leaky_relu(h, layer.slope);
        break;
      case LayerKind::tanh:
        h = tanh(h);
        break;
      case LayerKind::sigmoid:
        h = sigmoid(h);
        break;
      case LayerKind::dropout:
        if (mode == NormMode::train && layer.rate > 0.0) {
          if (!dropout_rng) throw std::invalid_argument("train-mode dropout needs an RNG stream");
          h = dropout(h, layer.rate, true, *dropout_rng);
        }
        break;
      case LayerKind::flatten:
        h = flatten(h);
        break;
      case LayerKind::reshape: {
        Shape target{n};
        target.insert(target.end(), layer.target.begin(), layer.target.end());
        h = reshape(h, target);
        break;
      }
    }
  }
  return h;
}

NamedTensors Network::buffers() const {
  NamedTensors out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind != LayerKind::batch_norm) continue;
    out.add(layers_[i].name + ".running_mean", bn_stats_[i].mean);
    out.add(layers_[i].name + ".running_var", bn_stats_[i].var);
  }
  return out;
}

void Network::set_buffers(const NamedTensors& buffers) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind != LayerKind::batch_norm) continue;
    const auto& mean = buffers.at(layers_[i].name + ".running_mean");
    const auto& var = buffers.at(layers_[i].name + ".running_var");
    if (mean.shape() != bn_stats_[i].mean.shape() || var.shape() != bn_stats_[i].var.shape()) {
      throw DimensionError("running statistics of '" + layers_[i].name + "' have the wrong shape");
    }
    bn_stats_[i].mean = mean.detach();
    bn_stats_[i].var = var.detach();
  }
}

bool Network::couples_batch(NormMode mode) const {
  if (mode != NormMode::train) return false;
  for (const auto& l : layers_)
    if (l.kind == LayerKind::batch_norm) return true;
  return false;
}

std::string Network::topology() const {
  json j;
  j["input_shape"] = input_shape_;
  j["dtype"] = dtype_name(dtype_);
  json layers = json::array();
  for (const auto& l : layers_) {
    json e;
    e["kind"] = layer_kind_name(l.kind);
    e["name"] = l.name;
    e["units"] = l.units;
    e["kernel"] = l.kernel;
    e["stride"] = l.stride;
    e["padding"] = l.padding == Padding::half ? "half" : "valid";
    e["slope"] = l.slope;
    e["rate"] = l.rate;
    e["eps"] = l.eps;
    e["target"] = l.target;
    layers.push_back(std::move(e));
  }
  j["layers"] = std::move(layers);
  return j.dump();
}

Network Network::from_topology(std::string_view text) {
  const json j = json::parse(text);
  std::vector<LayerSpec> layers;
  for (const auto& e : j.at("layers")) {
    LayerSpec l;
    l.kind = parse_layer_kind(e.at("kind").get<std::string>());
    l.name = e.at("name").get<std::string>();
    l.units = e.at("units").get<std::int64_t>();
    l.kernel = e.at("kernel").get<int>();
    l.stride = e.at("stride").get<int>();
    l.padding = e.at("padding").get<std::string>() == "half" ? Padding::half : Padding::valid;
    l.slope = e.at("slope").get<double>();
    l.rate = e.at("rate").get<double>();
    l.eps = e.at("eps").get<double>();
    l.target = e.at("target").get<Shape>();
    layers.push_back(std::move(l));
  }
  const auto dtype_text = j.at("dtype").get<std::string>();
  if (dtype_text != "f32" && dtype_text != "f64") {
    throw std::invalid_argument("unknown dtype '" + dtype_text + "' in topology");
  }
  Rng unused(0);
  return Network(j.at("input_shape").get<Shape>(), std::move(layers), unused,
                 dtype_text == "f32" ? DType::f32 : DType::f64);
}

std::string_view critic_norm_name(CriticNorm norm) {
  switch (norm) {
    case CriticNorm::none:
      return "none";
    case CriticNorm::layer_norm:
      return "layer_norm";
    case CriticNorm::batch_norm:
      return "batch_norm";
  }
  return "none";
}

CriticNorm parse_critic_norm(std::string_view name) {
  if (name == "none") return CriticNorm::none;
  if (name == "layer_norm") return CriticNorm::layer_norm;
  if (name == "batch_norm") return CriticNorm::batch_norm;
  throw std::invalid_argument("unknown critic normalization '" + std::string(name) + "'");
}

int NetworkConfig::n_conv() const {
  validate();
  return std::bit_width(static_cast<unsigned>(input_size)) - 1 - 2;
}

std::int64_t NetworkConfig::channels(int i) const {
  return std::max<std::int64_t>(1, std::llround(base_filters * std::ldexp(1.0, i) * width_scale));
}

std::int64_t NetworkConfig::hidden() const {
  return std::max<std::int64_t>(1, std::llround(hidden_units * width_scale));
}

void NetworkConfig::validate() const {
  if (input_size < 16 || !std::has_single_bit(static_cast<unsigned>(input_size))) {
    throw std::invalid_argument("input size must be a power of two >= 16, got " +
                                std::to_string(input_size));
  }
  if (base_filters < 1) throw std::invalid_argument("base_filters must be >= 1");
  if (!(width_scale > 0.0 && width_scale <= 1.0)) {
    throw std::invalid_argument("width_scale must lie in (0, 1]");
  }
  if (hidden_units < 1) throw std::invalid_argument("hidden_units must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  }
}

std::vector<LayerSpec> classifier_layers(const NetworkConfig& cfg, int n_classes) {
  if (n_classes < 2) throw std::invalid_argument("classifier needs at least 2 classes");
  const int n = cfg.n_conv();
  std::vector<LayerSpec> layers;
  for (int i = 0; i < n; ++i) {
    const auto id = std::to_string(i + 1);
    layers.push_back(make(LayerKind::conv, "conv" + id, cfg.channels(i)));
    layers.push_back(make(LayerKind::batch_norm, "bn" + id));
    layers.push_back(leaky("act" + id, cfg.slope));
  }
  layers.push_back(make(LayerKind::flatten, "flatten"));
  layers.push_back(make(LayerKind::dense, "fc1", cfg.hidden()));
  layers.push_back(make(LayerKind::batch_norm, "bn_fc1"));
  layers.push_back(leaky("act_fc1", cfg.slope));
  auto drop = make(LayerKind::dropout, "drop_fc1");
  drop.rate = cfg.dropout_rate;
  layers.push_back(drop);
  layers.push_back(make(LayerKind::dense, "fc2", n_classes));
  return layers;
}

Network build_classifier(const NetworkConfig& cfg, int n_classes, Rng& rng, DType dtype) {
  auto layers = classifier_layers(cfg, n_classes);
  return Network({1, cfg.input_size, cfg.input_size}, std::move(layers), rng, dtype);
}

std::vector<LayerSpec> critic_layers(const NetworkConfig& cfg) {
  const int n = cfg.n_conv();
  auto norm = [&](std::string name) -> std::optional<LayerSpec> {
    switch (cfg.critic_norm) {
      case CriticNorm::none:
        return std::nullopt;
      case CriticNorm::layer_norm:
        return make(LayerKind::layer_norm, std::move(name));
      case CriticNorm::batch_norm:
        return make(LayerKind::batch_norm, std::move(name));
    }
    return std::nullopt;
  };
  std::vector<LayerSpec> layers;
  for (int i = 0; i < n; ++i) {
    const auto id = std::to_string(i + 1);
    layers.push_back(make(LayerKind::conv, "conv" + id, cfg.channels(i)));
    if (auto l = norm("norm" + id)) layers.push_back(*l);
    layers.push_back(leaky("act" + id, cfg.slope));
  }
  layers.push_back(make(LayerKind::flatten, "flatten"));
  layers.push_back(make(LayerKind::dense, "fc1", cfg.hidden()));
  if (auto l = norm("norm_fc1")) layers.push_back(*l);
  layers.push_back(leaky("act_fc1", cfg.slope));
  layers.push_back(make(LayerKind::dense, "fc2", 1));
  return layers;
}

Network build_critic(const NetworkConfig& cfg, Rng& rng, DType dtype) {
  return Network({1, cfg.input_size, cfg.input_size}, critic_layers(cfg), rng, dtype);
}

std::vector<LayerSpec> generator_layers(int latent_dim, const NetworkConfig& cfg) {
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  const int n = cfg.n_conv();
  const std::int64_t top = cfg.channels(n - 1);
  std::vector<LayerSpec> layers;
  layers.push_back(make(LayerKind::dense, "fc", 16 * top));
  auto to_map = make(LayerKind::reshape, "to_map");
  to_map.target = {top, 4, 4};
  layers.push_back(to_map);
  layers.push_back(make(LayerKind::batch_norm, "bn0"));
  layers.push_back(leaky("act0", cfg.slope));
  for (int i = 1; i < n; ++i) {
    const auto id = std::to_string(i);
    layers.push_back(make(LayerKind::conv_transpose, "deconv" + id, cfg.channels(n - 1 - i)));
    layers.push_back(make(LayerKind::batch_norm, "bn" + id));
    layers.push_back(leaky("act" + id, cfg.slope));
  }
  layers.push_back(make(LayerKind::conv_transpose, "deconv" + std::to_string(n), 1));
  layers.push_back(make(LayerKind::tanh, "out"));
  return layers;
}

Network build_generator(int latent_dim, const NetworkConfig& cfg, Rng& rng, DType dtype) {
  return Network({latent_dim}, generator_layers(latent_dim, cfg), rng, dtype);
}

Network build_mlp(std::int64_t input_dim, const std::vector<std::int64_t>& hidden,
                  std::int64_t output_dim, Rng& rng, DType dtype, double slope) {
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const auto id = std::to_string(i + 1);
    layers.push_back(make(LayerKind::dense, "fc" + id, hidden[i]));
    layers.push_back(leaky("act" + id, slope));
  }
  layers.push_back(make(LayerKind::dense, "out", output_dim));
  return Network({input_dim}, std::move(layers), rng, dtype);
}

}  // namespace embryoforge

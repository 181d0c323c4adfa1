#include "embryoforge/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace embryoforge {

void NamedTensors::add(std::string name, Tensor tensor) {
  if (contains(name)) throw std::invalid_argument("duplicate tensor name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

bool NamedTensors::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.first == name; });
}

const Tensor& NamedTensors::at(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.first == name) return e.second;
  throw std::out_of_range("no tensor named '" + std::string(name) + "'");
}

void NamedTensors::set(std::string_view name, Tensor tensor) {
  for (auto& e : entries_) {
    if (e.first == name) {
      if (e.second.shape() != tensor.shape() || e.second.dtype() != tensor.dtype()) {
        throw DimensionError("replacement for '" + e.first + "' has shape " +
                             shape_str(tensor.shape()) + ", expected " + shape_str(e.second.shape()));
      }
      e.second = std::move(tensor);
      return;
    }
  }
  throw std::out_of_range("no tensor named '" + std::string(name) + "'");
}

std::vector<Tensor> NamedTensors::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

std::int64_t NamedTensors::total_numel() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

void ParamSet::add(std::string name, Tensor tensor) {
  tensor = tensor.detach();
  tensor.requires_grad_();
  NamedTensors::add(std::move(name), std::move(tensor));
}

void ParamSet::set(std::string_view name, Tensor tensor) {
  tensor = tensor.detach();
  tensor.requires_grad_();
  NamedTensors::set(name, std::move(tensor));
}

AdamState AdamState::fresh(const ParamSet& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& [name, p] : params) {
    s.m.push_back(Tensor::zeros(p.shape(), p.dtype()));
    s.v.push_back(Tensor::zeros(p.shape(), p.dtype()));
  }
  return s;
}

void adam_step(ParamSet& params, std::span<const Tensor> grads, AdamState& state) {
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                                std::to_string(params.size()) + " parameters");
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameter set");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& name = params.entries()[i].first;
    if (!grads[i].defined()) throw std::invalid_argument("adam_step: missing gradient for '" + name + "'");
    if (grads[i].shape() != params.entries()[i].second.shape()) {
      throw DimensionError("adam_step: gradient for '" + name + "' has shape " +
                           shape_str(grads[i].shape()));
    }
  }
  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Tensor p = params.entries()[i].second;
    visit_dtype(p.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const Tensor g = grads[i].dtype() == p.dtype() ? grads[i] : grads[i].to(p.dtype());
      auto gd = g.template data<T>();
      auto pd = p.template mutable_data<T>();
      auto md = state.m[i].template mutable_data<T>();
      auto vd = state.v[i].template mutable_data<T>();
      for (std::size_t j = 0; j < pd.size(); ++j) {
        const double gj = gd[j];
        const double m = c.beta1 * md[j] + (1.0 - c.beta1) * gj;
        const double v = c.beta2 * vd[j] + (1.0 - c.beta2) * gj * gj;
        md[j] = static_cast<T>(m);
        vd[j] = static_cast<T>(v);
        pd[j] = static_cast<T>(pd[j] - c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps));
      }
    });
  }
}

Tensor he_normal(const Shape& shape, std::int64_t fan_in, Rng& rng, DType dtype) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(std::max<std::int64_t>(fan_in, 1)));
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.normal() * stddev;
  return Tensor::from_vector(shape, std::move(v), dtype);
}

ParamSet init_params(std::span<const LayerSpec> layers, const Shape& input, Rng& rng, DType dtype) {
  const auto shapes = infer_shapes(layers, input);
  ParamSet params;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    const Shape& in = shapes[i];
    const std::int64_t k = layer.kernel;
    switch (layer.kind) {
      case LayerKind::conv:
        params.add(layer.name + ".kernel", he_normal({layer.units, in[0], k, k}, in[0] * k * k, rng, dtype));
        params.add(layer.name + ".bias", Tensor::zeros({layer.units}, dtype));
        break;
      case LayerKind::conv_transpose:
        params.add(layer.name + ".kernel", he_normal({in[0], layer.units, k, k}, in[0] * k * k, rng, dtype));
        params.add(layer.name + ".bias", Tensor::zeros({layer.units}, dtype));
        break;
      case LayerKind::dense:
        params.add(layer.name + ".weight", he_normal({in[0], layer.units}, in[0], rng, dtype));
        params.add(layer.name + ".bias", Tensor::zeros({layer.units}, dtype));
        break;
      case LayerKind::batch_norm:
      case LayerKind::layer_norm:
        params.add(layer.name + ".gamma", Tensor::ones({in[0]}, dtype));
        params.add(layer.name + ".beta", Tensor::zeros({in[0]}, dtype));
        break;
      default:
        break;
    }
  }
  return params;
}

}  // namespace embryoforge

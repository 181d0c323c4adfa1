#include "embryoforge/tensor.hpp"

#include <sstream>

namespace embryoforge {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string_view dtype_name(DType dtype) {
  return dtype == DType::f32 ? "f32" : "f64";
}

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw DimensionError("negative dimension in " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor detail_make(Shape shape, detail::Buffer buffer) {
  auto impl = std::make_shared<detail::TensorImpl>();
  const auto n = shape_numel(shape);
  std::visit(
      [&](const auto& v) {
        if (static_cast<std::int64_t>(v.size()) != n) {
          throw DimensionError("buffer of " + std::to_string(v.size()) +
                               " values does not fit shape " + shape_str(shape));
        }
      },
      buffer);
  impl->shape = std::move(shape);
  impl->buffer = std::make_shared<detail::Buffer>(std::move(buffer));
  return Tensor(std::move(impl));
}

void detail_attach(Tensor& out, std::string_view op, std::vector<Tensor> inputs,
                   BackwardFn backward) {
  if (!grad_enabled()) return;
  bool any = false;
  for (const auto& in : inputs) any = any || (in.defined() && in.requires_grad());
  if (!any) return;
  auto node = std::make_shared<Node>();
  node->op = std::string(op);
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.impl_->requires_grad = true;
  out.impl_->grad_fn = std::move(node);
}

detail::TensorImpl* detail_impl(const Tensor& t) { return t.impl_.get(); }

Tensor Tensor::zeros(Shape shape, DType dtype) { return full(std::move(shape), 0.0, dtype); }

Tensor Tensor::ones(Shape shape, DType dtype) { return full(std::move(shape), 1.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  if (dtype == DType::f32) {
    return detail_make(std::move(shape), std::vector<float>(n, static_cast<float>(value)));
  }
  return detail_make(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value, DType dtype) { return full({}, value, dtype); }

Tensor Tensor::from_vector(Shape shape, std::vector<double> values, DType dtype) {
  if (dtype == DType::f32) {
    return detail_make(std::move(shape), std::vector<float>(values.begin(), values.end()));
  }
  return detail_make(std::move(shape), std::move(values));
}

Tensor Tensor::from_floats(Shape shape, std::vector<float> values) {
  return detail_make(std::move(shape), std::move(values));
}

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->shape;
}

std::int64_t Tensor::numel() const { return shape_numel(shape()); }

DType Tensor::dtype() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->buffer->index() == 0 ? DType::f32 : DType::f64;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::requires_grad_(bool on) {
  if (!is_leaf()) throw std::logic_error("requires_grad_ on a non-leaf tensor");
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return impl_ && !impl_->grad_fn; }

const std::shared_ptr<Node>& Tensor::grad_fn() const { return impl_->grad_fn; }

std::vector<double> Tensor::to_vector() const {
  return std::visit(
      [](const auto& v) { return std::vector<double>(v.begin(), v.end()); },
      *impl_->buffer);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return value(0);
}

double Tensor::value(std::int64_t flat_index) const {
  return std::visit(
      [&](const auto& v) { return static_cast<double>(v.at(flat_index)); },
      *impl_->buffer);
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = shape();
  impl->buffer = impl_->buffer;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const { return detail_make(shape(), *impl_->buffer); }

Tensor Tensor::to(DType dtype) const {
  if (dtype == this->dtype()) return clone();
  return std::visit(
      [&](const auto& v) {
        if (dtype == DType::f32) {
          return detail_make(shape(), std::vector<float>(v.begin(), v.end()));
        }
        return detail_make(shape(), std::vector<double>(v.begin(), v.end()));
      },
      *impl_->buffer);
}

void Tensor::check_mutable() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  if (impl_->grad_fn) throw std::logic_error("in-place write to a graph output");
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

EnableGradGuard::EnableGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = true; }
EnableGradGuard::~EnableGradGuard() { g_grad_enabled = previous_; }

}  // namespace embryoforge

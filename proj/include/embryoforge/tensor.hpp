#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace embryoforge {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

std::string_view dtype_name(DType dtype);

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised when operand shapes do not fit an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tensor;
struct Node;

namespace detail {

using Buffer = std::variant<std::vector<float>, std::vector<double>>;

struct TensorImpl {
  Shape shape;
  std::shared_ptr<Buffer> buffer;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;
};

}  // namespace detail

/// Handle to an n-dimensional row-major array. Copies share the same
/// underlying value; ops never mutate their inputs.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dtype = DType::f64);
  static Tensor ones(Shape shape, DType dtype = DType::f64);
  static Tensor full(Shape shape, double value, DType dtype = DType::f64);
  static Tensor scalar(double value, DType dtype = DType::f64);
  static Tensor from_vector(Shape shape, std::vector<double> values,
                            DType dtype = DType::f64);
  static Tensor from_floats(Shape shape, std::vector<float> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::int64_t dim(std::size_t axis) const { return shape().at(axis); }
  std::int64_t numel() const;
  DType dtype() const;

  bool requires_grad() const;
  /// Marks a leaf as a differentiation target. Fails on graph outputs.
  Tensor& requires_grad_(bool on = true);
  bool is_leaf() const;
  const std::shared_ptr<Node>& grad_fn() const;

  template <class T>
  std::span<const T> data() const {
    return std::get<std::vector<T>>(*impl_->buffer);
  }

  /// In-place access for leaves (optimizer updates, perturbation probes).
  template <class T>
  std::span<T> mutable_data() {
    check_mutable();
    return std::get<std::vector<T>>(*impl_->buffer);
  }

  std::vector<double> to_vector() const;
  double item() const;
  double value(std::int64_t flat_index) const;

  /// Same values, no graph history.
  Tensor detach() const;
  /// Deep copy with no graph history.
  Tensor clone() const;
  Tensor to(DType dtype) const;

  const void* id() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  void check_mutable() const;

  std::shared_ptr<detail::TensorImpl> impl_;

  friend Tensor detail_make(Shape shape, detail::Buffer buffer);
  friend void detail_attach(Tensor& out, std::string_view op,
                            std::vector<Tensor> inputs,
                            std::function<std::vector<Tensor>(
                                const Tensor&, const std::vector<bool>&)>
                                backward);
  friend detail::TensorImpl* detail_impl(const Tensor& t);
};

/// Backward rule: given dL/d(output) and which inputs need a gradient,
/// returns dL/d(input_i) (undefined Tensor where not needed). Rules are
/// written with differentiable ops, so running them with grad recording on
/// yields a differentiable gradient.
using BackwardFn =
    std::function<std::vector<Tensor>(const Tensor&, const std::vector<bool>&)>;

struct Node {
  std::string op;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

Tensor detail_make(Shape shape, detail::Buffer buffer);
void detail_attach(Tensor& out, std::string_view op, std::vector<Tensor> inputs,
                   BackwardFn backward);
detail::TensorImpl* detail_impl(const Tensor& t);

bool grad_enabled();

/// Disables graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Enables graph recording for its lifetime.
class EnableGradGuard {
 public:
  EnableGradGuard();
  ~EnableGradGuard();
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool previous_;
};

/// Calls f(float{}) or f(double{}) according to dtype.
template <class F>
decltype(auto) visit_dtype(DType dtype, F&& f) {
  if (dtype == DType::f32) return f(float{});
  return f(double{});
}

template <class T>
constexpr DType dtype_of() {
  return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

}  // namespace embryoforge

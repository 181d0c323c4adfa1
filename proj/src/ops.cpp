#include "embryoforge/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace embryoforge {

namespace {

using Strides = std::vector<std::int64_t>;

void check_same_dtype(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.dtype() != b.dtype()) {
    throw std::invalid_argument(std::string(op) + ": dtype mismatch " +
                                std::string(dtype_name(a.dtype())) + " vs " +
                                std::string(dtype_name(b.dtype())));
  }
}

// Strides of `in` when viewed as broadcast to `out` (0 along broadcast axes).
Strides broadcast_strides(const Shape& in, const Shape& out) {
  const std::size_t r = out.size();
  Strides s(r, 0);
  std::int64_t step = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t ii = in.size() - 1 - k;
    const std::size_t oi = r - 1 - k;
    s[oi] = (in[ii] == 1 && out[oi] != 1) ? 0 : step;
    step *= in[ii];
  }
  return s;
}

// Visits every element of out_shape in row-major order as f(out_index,
// offset_a, offset_b).
template <class F>
void for_each_broadcast2(const Shape& out_shape, const Strides& sa, const Strides& sb, F&& f) {
  const std::int64_t n = shape_numel(out_shape);
  if (n == 0) return;
  const std::size_t r = out_shape.size();
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const std::int64_t inner = out_shape[r - 1];
  const std::int64_t outer = n / inner;
  const std::int64_t ia = sa[r - 1];
  const std::int64_t ib = sb[r - 1];
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t oa = 0;
  std::int64_t ob = 0;
  for (std::int64_t o = 0; o < outer; ++o) {
    const std::int64_t base = o * inner;
    for (std::int64_t j = 0; j < inner; ++j) f(base + j, oa + j * ia, ob + j * ib);
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < out_shape[d]) break;
      oa -= sa[d] * out_shape[d];
      ob -= sb[d] * out_shape[d];
      idx[d] = 0;
    }
  }
}

template <class F>
Tensor binary_kernel(const Tensor& a, const Tensor& b, const Shape& out_shape, F f) {
  return visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const auto ad = a.data<T>();
    const auto bd = b.data<T>();
    const auto n = shape_numel(out_shape);
    std::vector<T> out(static_cast<std::size_t>(n));
    if (a.shape() == out_shape && b.shape() == out_shape) {
      for (std::int64_t i = 0; i < n; ++i) out[i] = f(ad[i], bd[i]);
    } else if (a.shape() == out_shape && b.numel() == 1) {
      const T s = bd[0];
      for (std::int64_t i = 0; i < n; ++i) out[i] = f(ad[i], s);
    } else if (b.shape() == out_shape && a.numel() == 1) {
      const T s = ad[0];
      for (std::int64_t i = 0; i < n; ++i) out[i] = f(s, bd[i]);
    } else {
      const auto sa = broadcast_strides(a.shape(), out_shape);
      const auto sb = broadcast_strides(b.shape(), out_shape);
      for_each_broadcast2(out_shape, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
        out[i] = f(ad[ia], bd[ib]);
      });
    }
    return detail_make(out_shape, std::move(out));
  });
}

template <class F>
Tensor unary_kernel(const Tensor& x, F f) {
  return visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const auto xd = x.data<T>();
    std::vector<T> out(xd.size());
    for (std::size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
    return detail_make(x.shape(), std::move(out));
  });
}

Tensor scalar_like(const Tensor& x, double v) { return Tensor::scalar(v, x.dtype()); }

std::vector<Tensor> grads(std::initializer_list<Tensor> g) { return std::vector<Tensor>(g); }

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t k = 0; k < r; ++k) {
    const std::int64_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::int64_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw DimensionError("cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
    }
    out[r - 1 - k] = da == 1 ? db : da;
  }
  return out;
}

Tensor zeros_like(const Tensor& x) { return Tensor::zeros(x.shape(), x.dtype()); }
Tensor full_like(const Tensor& x, double value) { return Tensor::full(x.shape(), value, x.dtype()); }

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "add");
  auto out = binary_kernel(a, b, broadcast_shapes(a.shape(), b.shape()),
                           [](auto x, auto y) { return x + y; });
  detail_attach(out, "add", {a, b},
                [as = a.shape(), bs = b.shape()](const Tensor& g, const std::vector<bool>& need) {
                  return grads({need[0] ? sum_to(g, as) : Tensor{},
                                need[1] ? sum_to(g, bs) : Tensor{}});
                });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "sub");
  auto out = binary_kernel(a, b, broadcast_shapes(a.shape(), b.shape()),
                           [](auto x, auto y) { return x - y; });
  detail_attach(out, "sub", {a, b},
                [as = a.shape(), bs = b.shape()](const Tensor& g, const std::vector<bool>& need) {
                  return grads({need[0] ? sum_to(g, as) : Tensor{},
                                need[1] ? sum_to(neg(g), bs) : Tensor{}});
                });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "mul");
  auto out = binary_kernel(a, b, broadcast_shapes(a.shape(), b.shape()),
                           [](auto x, auto y) { return x * y; });
  detail_attach(out, "mul", {a, b}, [a, b](const Tensor& g, const std::vector<bool>& need) {
    return grads({need[0] ? sum_to(mul(g, b), a.shape()) : Tensor{},
                  need[1] ? sum_to(mul(g, a), b.shape()) : Tensor{}});
  });
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "div");
  auto out = binary_kernel(a, b, broadcast_shapes(a.shape(), b.shape()),
                           [](auto x, auto y) { return x / y; });
  detail_attach(out, "div", {a, b}, [a, b](const Tensor& g, const std::vector<bool>& need) {
    return grads({need[0] ? sum_to(div(g, b), a.shape()) : Tensor{},
                  need[1] ? sum_to(neg(div(mul(g, a), square(b))), b.shape()) : Tensor{}});
  });
  return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator+(const Tensor& a, double b) { return add(a, scalar_like(a, b)); }
Tensor operator-(const Tensor& a, double b) { return sub(a, scalar_like(a, b)); }
Tensor operator*(const Tensor& a, double b) { return mul(a, scalar_like(a, b)); }
Tensor operator/(const Tensor& a, double b) { return div(a, scalar_like(a, b)); }
Tensor operator+(double a, const Tensor& b) { return add(scalar_like(b, a), b); }
Tensor operator-(double a, const Tensor& b) { return sub(scalar_like(b, a), b); }
Tensor operator*(double a, const Tensor& b) { return mul(scalar_like(b, a), b); }
Tensor operator/(double a, const Tensor& b) { return div(scalar_like(b, a), b); }
Tensor operator-(const Tensor& a) { return neg(a); }

Tensor neg(const Tensor& x) {
  auto out = unary_kernel(x, [](auto v) { return -v; });
  detail_attach(out, "neg", {x}, [](const Tensor& g, const std::vector<bool>&) {
    return grads({neg(g)});
  });
  return out;
}

Tensor square(const Tensor& x) {
  auto out = unary_kernel(x, [](auto v) { return v * v; });
  detail_attach(out, "square", {x}, [x](const Tensor& g, const std::vector<bool>&) {
    return grads({mul(g, x * 2.0)});
  });
  return out;
}

// Rules that reuse the forward value recompute it from the input when
// recording, so the returned gradient stays connected to x.
Tensor sqrt(const Tensor& x) {
  auto out = unary_kernel(x, [](auto v) { return std::sqrt(v); });
  detail_attach(out, "sqrt", {x}, [x, y = out.detach()](const Tensor& g, const std::vector<bool>&) {
    const Tensor root = grad_enabled() ? sqrt(x) : y;
    return grads({div(g, root * 2.0)});
  });
  return out;
}

Tensor exp(const Tensor& x) {
  auto out = unary_kernel(x, [](auto v) { return std::exp(v); });
  detail_attach(out, "exp", {x}, [x, y = out.detach()](const Tensor& g, const std::vector<bool>&) {
    return grads({mul(g, grad_enabled() ? exp(x) : y)});
  });
  return out;
}

Tensor log(const Tensor& x) {
  auto out = unary_kernel(x, [](auto v) { return std::log(v); });
  detail_attach(out, "log", {x}, [x](const Tensor& g, const std::vector<bool>&) {
    return grads({div(g, x)});
  });
  return out;
}

Tensor tanh(const Tensor& x) {
  auto out = unary_kernel(x, [](auto v) { return std::tanh(v); });
  detail_attach(out, "tanh", {x}, [x, y = out.detach()](const Tensor& g, const std::vector<bool>&) {
    const Tensor t = grad_enabled() ? tanh(x) : y;
    return grads({mul(g, 1.0 - square(t))});
  });
  return out;
}

Tensor sigmoid(const Tensor& x) {
  auto out = unary_kernel(x, [](auto v) {
    using T = decltype(v);
    return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  });
  detail_attach(out, "sigmoid", {x}, [x, y = out.detach()](const Tensor& g, const std::vector<bool>&) {
    const Tensor s = grad_enabled() ? sigmoid(x) : y;
    return grads({mul(g, mul(s, 1.0 - s))});
  });
  return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw std::invalid_argument("leaky_relu slope must lie in [0, 1)");
  }
  auto out = unary_kernel(x, [slope](auto v) {
    using T = decltype(v);
    return v > T(0) ? v : static_cast<T>(slope) * v;
  });
  detail_attach(out, "leaky_relu", {x}, [x, slope](const Tensor& g, const std::vector<bool>&) {
    const Tensor mask = unary_kernel(x, [slope](auto v) {
      using T = decltype(v);
      return v > T(0) ? T(1) : static_cast<T>(slope);
    });
    return grads({mul(g, mask)});
  });
  return out;
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  auto out = unary_kernel(x, [lo, hi](auto v) {
    using T = decltype(v);
    return std::clamp(v, static_cast<T>(lo), static_cast<T>(hi));
  });
  detail_attach(out, "clamp", {x}, [x, lo, hi](const Tensor& g, const std::vector<bool>&) {
    const Tensor mask = unary_kernel(x, [lo, hi](auto v) {
      using T = decltype(v);
      return (v >= static_cast<T>(lo) && v <= static_cast<T>(hi)) ? T(1) : T(0);
    });
    return grads({mul(g, mask)});
  });
  return out;
}

Tensor sum(const Tensor& x) { return sum_to(x, Shape{}); }

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return sum(x) * (1.0 / static_cast<double>(x.numel()));
}

Tensor sum_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  if (broadcast_shapes(shape, x.shape()) != x.shape()) {
    throw DimensionError("sum_to: " + shape_str(x.shape()) + " does not reduce to " +
                         shape_str(shape));
  }
  auto out = visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const auto xd = x.data<T>();
    std::vector<double> acc(static_cast<std::size_t>(shape_numel(shape)), 0.0);
    const auto so = broadcast_strides(shape, x.shape());
    const Strides zero(x.rank(), 0);
    for_each_broadcast2(x.shape(), so, zero, [&](std::int64_t i, std::int64_t o, std::int64_t) {
      acc[o] += static_cast<double>(xd[i]);
    });
    return detail_make(shape, std::vector<T>(acc.begin(), acc.end()));
  });
  detail_attach(out, "sum_to", {x}, [xs = x.shape()](const Tensor& g, const std::vector<bool>&) {
    return grads({broadcast_to(g, xs)});
  });
  return out;
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  if (broadcast_shapes(x.shape(), shape) != shape) {
    throw DimensionError("broadcast_to: " + shape_str(x.shape()) + " does not broadcast to " +
                         shape_str(shape));
  }
  auto out = visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const auto xd = x.data<T>();
    std::vector<T> o(static_cast<std::size_t>(shape_numel(shape)));
    const auto sx = broadcast_strides(x.shape(), shape);
    const Strides zero(shape.size(), 0);
    for_each_broadcast2(shape, sx, zero, [&](std::int64_t i, std::int64_t ix, std::int64_t) {
      o[i] = xd[ix];
    });
    return detail_make(shape, std::move(o));
  });
  detail_attach(out, "broadcast_to", {x}, [xs = x.shape()](const Tensor& g, const std::vector<bool>&) {
    return grads({sum_to(g, xs)});
  });
  return out;
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  if (x.shape() == shape) return x;
  auto out = visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const auto xd = x.data<T>();
    return detail_make(shape, std::vector<T>(xd.begin(), xd.end()));
  });
  detail_attach(out, "reshape", {x}, [xs = x.shape()](const Tensor& g, const std::vector<bool>&) {
    return grads({reshape(g, xs)});
  });
  return out;
}

Tensor flatten(const Tensor& x) {
  if (x.rank() < 1) throw DimensionError("flatten of a rank-0 tensor");
  const std::int64_t n = x.dim(0);
  return reshape(x, {n, n == 0 ? 0 : x.numel() / n});
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("transpose expects 2-D, got " + shape_str(x.shape()));
  const auto rows = x.dim(0);
  const auto cols = x.dim(1);
  auto out = visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const auto xd = x.data<T>();
    std::vector<T> o(xd.size());
    for (std::int64_t i = 0; i < rows; ++i)
      for (std::int64_t j = 0; j < cols; ++j) o[j * rows + i] = xd[i * cols + j];
    return detail_make({cols, rows}, std::move(o));
  });
  detail_attach(out, "transpose", {x}, [](const Tensor& g, const std::vector<bool>&) {
    return grads({transpose(g)});
  });
  return out;
}

namespace {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using CMap = Eigen::Map<const MatR<T>>;

template <class T>
using MMap = Eigen::Map<MatR<T>>;

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const auto m = a.dim(0);
  const auto k = a.dim(1);
  const auto n = b.dim(1);
  auto out = visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    std::vector<T> o(static_cast<std::size_t>(m * n));
    MMap<T> om(o.data(), m, n);
    om.noalias() = CMap<T>(a.data<T>().data(), m, k) * CMap<T>(b.data<T>().data(), k, n);
    return detail_make({m, n}, std::move(o));
  });
  detail_attach(out, "matmul", {a, b}, [a, b](const Tensor& g, const std::vector<bool>& need) {
    return grads({need[0] ? matmul(g, transpose(b)) : Tensor{},
                  need[1] ? matmul(transpose(a), g) : Tensor{}});
  });
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || input.dim(1) != weight.dim(0)) {
    throw DimensionError("dense: input " + shape_str(input.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(1)) {
    throw DimensionError("dense: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  return add(matmul(input, weight), bias);
}

// ---------------------------------------------------------------------------
// Convolution family. All three ops share one geometry: an input image space
// [N,C,H,W], an output space [N,O,OH,OW] and a kernel [O,C,KH,KW]. conv2d maps
// image -> output, conv2d_transpose maps output -> image, and
// conv2d_kernel_grad maps (image, output) -> kernel. Each op's backward is
// expressed through the other two, which closes the family under repeated
// differentiation.

int padding_pixels(Padding padding, std::int64_t kernel_size) {
  return padding == Padding::valid ? 0 : static_cast<int>((kernel_size - 1) / 2);
}

namespace {

struct ConvGeom {
  std::int64_t n, c, h, w;     // image space
  std::int64_t o, oh, ow;      // output space
  std::int64_t kh, kw;
  std::int64_t stride, pad;

  std::int64_t k() const { return c * kh * kw; }
  std::int64_t p() const { return oh * ow; }
};

std::int64_t conv_out_size(std::int64_t in, std::int64_t k, std::int64_t stride, std::int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

void check_conv_params(int stride, int pad) {
  if (stride < 1) throw std::invalid_argument("convolution stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("convolution padding must be >= 0");
}

// col is [K, N*P]; row = (c*KH + i)*KW + j, column = n*P + oh*OW + ow.
template <class T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const std::int64_t np = g.n * g.p();
  for (std::int64_t c = 0; c < g.c; ++c)
    for (std::int64_t i = 0; i < g.kh; ++i)
      for (std::int64_t j = 0; j < g.kw; ++j) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * np;
        for (std::int64_t n = 0; n < g.n; ++n) {
          const T* img = x + (n * g.c + c) * g.h * g.w;
          T* dst = row + n * g.p();
          for (std::int64_t y = 0; y < g.oh; ++y) {
            const std::int64_t iy = y * g.stride - g.pad + i;
            if (iy < 0 || iy >= g.h) {
              std::fill(dst + y * g.ow, dst + (y + 1) * g.ow, T(0));
              continue;
            }
            for (std::int64_t xx = 0; xx < g.ow; ++xx) {
              const std::int64_t ix = xx * g.stride - g.pad + j;
              dst[y * g.ow + xx] = (ix >= 0 && ix < g.w) ? img[iy * g.w + ix] : T(0);
            }
          }
        }
      }
}

template <class T>
void col2im(const T* col, const ConvGeom& g, T* x) {
  const std::int64_t np = g.n * g.p();
  std::fill(x, x + g.n * g.c * g.h * g.w, T(0));
  for (std::int64_t c = 0; c < g.c; ++c)
    for (std::int64_t i = 0; i < g.kh; ++i)
      for (std::int64_t j = 0; j < g.kw; ++j) {
        const T* row = col + ((c * g.kh + i) * g.kw + j) * np;
        for (std::int64_t n = 0; n < g.n; ++n) {
          T* img = x + (n * g.c + c) * g.h * g.w;
          const T* src = row + n * g.p();
          for (std::int64_t y = 0; y < g.oh; ++y) {
            const std::int64_t iy = y * g.stride - g.pad + i;
            if (iy < 0 || iy >= g.h) continue;
            for (std::int64_t xx = 0; xx < g.ow; ++xx) {
              const std::int64_t ix = xx * g.stride - g.pad + j;
              if (ix >= 0 && ix < g.w) img[iy * g.w + ix] += src[y * g.ow + xx];
            }
          }
        }
      }
}

// [N,O,P] <-> [O,N*P]
template <class T>
void nop_to_onp(const T* src, std::int64_t n, std::int64_t o, std::int64_t p, T* dst) {
  for (std::int64_t a = 0; a < n; ++a)
    for (std::int64_t b = 0; b < o; ++b)
      std::copy(src + (a * o + b) * p, src + (a * o + b + 1) * p, dst + b * n * p + a * p);
}

template <class T>
void onp_to_nop(const T* src, std::int64_t n, std::int64_t o, std::int64_t p, T* dst) {
  for (std::int64_t a = 0; a < n; ++a)
    for (std::int64_t b = 0; b < o; ++b)
      std::copy(src + b * n * p + a * p, src + b * n * p + (a + 1) * p, dst + (a * o + b) * p);
}

Tensor conv_forward_raw(const Tensor& x, const Tensor& k, const ConvGeom& g) {
  return visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const std::int64_t np = g.n * g.p();
    std::vector<T> col(static_cast<std::size_t>(g.k() * np));
    im2col(x.data<T>().data(), g, col.data());
    std::vector<T> onp(static_cast<std::size_t>(g.o * np));
    MMap<T>(onp.data(), g.o, np).noalias() =
        CMap<T>(k.data<T>().data(), g.o, g.k()) * CMap<T>(col.data(), g.k(), np);
    std::vector<T> out(onp.size());
    onp_to_nop(onp.data(), g.n, g.o, g.p(), out.data());
    return detail_make({g.n, g.o, g.oh, g.ow}, std::move(out));
  });
}

Tensor conv_transpose_raw(const Tensor& y, const Tensor& k, const ConvGeom& g) {
  return visit_dtype(y.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const std::int64_t np = g.n * g.p();
    std::vector<T> onp(static_cast<std::size_t>(g.o * np));
    nop_to_onp(y.data<T>().data(), g.n, g.o, g.p(), onp.data());
    std::vector<T> col(static_cast<std::size_t>(g.k() * np));
    MMap<T>(col.data(), g.k(), np).noalias() =
        CMap<T>(k.data<T>().data(), g.o, g.k()).transpose() * CMap<T>(onp.data(), g.o, np);
    std::vector<T> out(static_cast<std::size_t>(g.n * g.c * g.h * g.w));
    col2im(col.data(), g, out.data());
    return detail_make({g.n, g.c, g.h, g.w}, std::move(out));
  });
}

Tensor conv_kernel_grad_raw(const Tensor& x, const Tensor& gy, const ConvGeom& g) {
  return visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const std::int64_t np = g.n * g.p();
    std::vector<T> col(static_cast<std::size_t>(g.k() * np));
    im2col(x.data<T>().data(), g, col.data());
    std::vector<T> onp(static_cast<std::size_t>(g.o * np));
    nop_to_onp(gy.data<T>().data(), g.n, g.o, g.p(), onp.data());
    std::vector<T> out(static_cast<std::size_t>(g.o * g.k()));
    MMap<T>(out.data(), g.o, g.k()).noalias() =
        CMap<T>(onp.data(), g.o, np) * CMap<T>(col.data(), g.k(), np).transpose();
    return detail_make({g.o, g.c, g.kh, g.kw}, std::move(out));
  });
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding padding) {
  if (kernel.rank() != 4) {
    throw DimensionError("conv2d: kernel must be 4-D, got " + shape_str(kernel.shape()));
  }
  return conv2d(input, kernel, stride, padding_pixels(padding, kernel.dim(2)));
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  check_same_dtype(input, kernel, "conv2d");
  check_conv_params(stride, pad);
  if (input.rank() != 4 || kernel.rank() != 4 || input.dim(1) != kernel.dim(1)) {
    throw DimensionError("conv2d: input " + shape_str(input.shape()) +
                         " does not match kernel " + shape_str(kernel.shape()));
  }
  ConvGeom g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernel.dim(0), 0, 0,
             kernel.dim(2), kernel.dim(3), stride, pad};
  if (g.kh > g.h + 2 * pad || g.kw > g.w + 2 * pad) {
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) +
                         " larger than padded input " + shape_str(input.shape()));
  }
  g.oh = conv_out_size(g.h, g.kh, stride, pad);
  g.ow = conv_out_size(g.w, g.kw, stride, pad);
  auto out = conv_forward_raw(input, kernel, g);
  detail_attach(out, "conv2d", {input, kernel},
                [input, kernel, g](const Tensor& gy, const std::vector<bool>& need) {
                  const int s = static_cast<int>(g.stride);
                  const int p = static_cast<int>(g.pad);
                  return grads(
                      {need[0] ? conv2d_transpose(gy, kernel, s, p, std::pair{g.h, g.w}) : Tensor{},
                       need[1] ? conv2d_kernel_grad(input, gy, s, p, g.kh, g.kw) : Tensor{}});
                });
  return out;
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride, Padding padding,
                        std::optional<std::pair<std::int64_t, std::int64_t>> output_hw) {
  if (kernel.rank() != 4) {
    throw DimensionError("conv2d_transpose: kernel must be 4-D, got " + shape_str(kernel.shape()));
  }
  return conv2d_transpose(input, kernel, stride, padding_pixels(padding, kernel.dim(2)),
                          output_hw);
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride, int pad,
                        std::optional<std::pair<std::int64_t, std::int64_t>> output_hw) {
  check_same_dtype(input, kernel, "conv2d_transpose");
  check_conv_params(stride, pad);
  if (input.rank() != 4 || kernel.rank() != 4 || input.dim(1) != kernel.dim(0)) {
    throw DimensionError("conv2d_transpose: input " + shape_str(input.shape()) +
                         " does not match kernel " + shape_str(kernel.shape()));
  }
  // Geometry of the forward convolution this op is the adjoint of.
  ConvGeom g{input.dim(0), kernel.dim(1), 0, 0, kernel.dim(0), input.dim(2), input.dim(3),
             kernel.dim(2), kernel.dim(3), stride, pad};
  if (output_hw) {
    g.h = output_hw->first;
    g.w = output_hw->second;
  } else {
    g.h = (g.oh - 1) * stride - 2 * pad + g.kh;
    g.w = (g.ow - 1) * stride - 2 * pad + g.kw;
  }
  if (g.h < 1 || g.w < 1 || g.kh > g.h + 2 * pad || g.kw > g.w + 2 * pad ||
      conv_out_size(g.h, g.kh, stride, pad) != g.oh ||
      conv_out_size(g.w, g.kw, stride, pad) != g.ow) {
    throw DimensionError("conv2d_transpose: output size " + std::to_string(g.h) + "x" +
                         std::to_string(g.w) + " inconsistent with input " +
                         shape_str(input.shape()) + " and kernel " + shape_str(kernel.shape()));
  }
  auto out = conv_transpose_raw(input, kernel, g);
  detail_attach(out, "conv2d_transpose", {input, kernel},
                [input, kernel, g](const Tensor& gx, const std::vector<bool>& need) {
                  const int s = static_cast<int>(g.stride);
                  const int p = static_cast<int>(g.pad);
                  return grads({need[0] ? conv2d(gx, kernel, s, p) : Tensor{},
                                need[1] ? conv2d_kernel_grad(gx, input, s, p, g.kh, g.kw) : Tensor{}});
                });
  return out;
}

Tensor conv2d_kernel_grad(const Tensor& input, const Tensor& grad_output, int stride, int pad,
                          std::int64_t kernel_h, std::int64_t kernel_w) {
  check_same_dtype(input, grad_output, "conv2d_kernel_grad");
  check_conv_params(stride, pad);
  if (input.rank() != 4 || grad_output.rank() != 4 || input.dim(0) != grad_output.dim(0)) {
    throw DimensionError("conv2d_kernel_grad: input " + shape_str(input.shape()) +
                         " does not match output gradient " + shape_str(grad_output.shape()));
  }
  ConvGeom g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), grad_output.dim(1),
             grad_output.dim(2), grad_output.dim(3), kernel_h, kernel_w, stride, pad};
  if (conv_out_size(g.h, g.kh, stride, pad) != g.oh || conv_out_size(g.w, g.kw, stride, pad) != g.ow) {
    throw DimensionError("conv2d_kernel_grad: output gradient " + shape_str(grad_output.shape()) +
                         " inconsistent with input " + shape_str(input.shape()));
  }
  auto out = conv_kernel_grad_raw(input, grad_output, g);
  detail_attach(out, "conv2d_kernel_grad", {input, grad_output},
                [input, grad_output, g](const Tensor& gk, const std::vector<bool>& need) {
                  const int s = static_cast<int>(g.stride);
                  const int p = static_cast<int>(g.pad);
                  return grads(
                      {need[0] ? conv2d_transpose(grad_output, gk, s, p, std::pair{g.h, g.w}) : Tensor{},
                       need[1] ? conv2d(input, gk, s, p) : Tensor{}});
                });
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// [1,C,1,...] for a tensor of shape [N,C,...].
Shape channel_shape(const Shape& x) {
  Shape s(x.size(), 1);
  s[1] = x[1];
  return s;
}

}  // namespace

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  NormMode mode, BatchNormStats& stats) {
  if (x.rank() < 2) throw DimensionError("batch_norm expects [N,C,...], got " + shape_str(x.shape()));
  const std::int64_t channels = x.dim(1);
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw DimensionError("batch_norm: gamma/beta " + shape_str(gamma.shape()) +
                         " do not match input " + shape_str(x.shape()));
  }
  if (!stats.mean.defined()) stats.mean = Tensor::zeros({channels}, x.dtype());
  if (!stats.var.defined()) stats.var = Tensor::ones({channels}, x.dtype());
  const Shape cs = channel_shape(x.shape());
  const Tensor g = reshape(gamma, cs);
  const Tensor b = reshape(beta, cs);

  if (mode == NormMode::eval) {
    const Tensor mu = reshape(stats.mean, cs);
    const Tensor inv = 1.0 / sqrt(reshape(stats.var, cs) + eps);
    return (x - mu) * inv * g + b;
  }
  if (x.dim(0) < 2) {
    throw std::invalid_argument("batch_norm: train mode needs a batch of at least 2, got " +
                                shape_str(x.shape()));
  }
  const double count = static_cast<double>(x.numel() / channels);
  const Tensor mu = sum_to(x, cs) * (1.0 / count);
  const Tensor centered = x - mu;
  const Tensor var = sum_to(square(centered), cs) * (1.0 / count);
  {
    NoGradGuard no_grad;
    const double m = stats.momentum;
    stats.mean = stats.mean * m + reshape(mu.detach(), {channels}) * (1.0 - m);
    stats.var = stats.var * m + reshape(var.detach(), {channels}) * (1.0 - m);
  }
  return centered / sqrt(var + eps) * g + b;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 2) throw DimensionError("layer_norm expects [N,C,...], got " + shape_str(x.shape()));
  const std::int64_t channels = x.dim(1);
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw DimensionError("layer_norm: gamma/beta " + shape_str(gamma.shape()) +
                         " do not match input " + shape_str(x.shape()));
  }
  const std::int64_t n = x.dim(0);
  const std::int64_t features = n == 0 ? 0 : x.numel() / n;
  const Tensor flat = reshape(x, {n, features});
  const Tensor mu = sum_to(flat, {n, 1}) * (1.0 / static_cast<double>(features));
  const Tensor centered = flat - mu;
  const Tensor var = sum_to(square(centered), {n, 1}) * (1.0 / static_cast<double>(features));
  const Tensor normed = reshape(centered / sqrt(var + eps), x.shape());
  const Shape cs = channel_shape(x.shape());
  return normed * reshape(gamma, cs) + reshape(beta, cs);
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep = 1.0 / (1.0 - rate);
  std::vector<double> mask(static_cast<std::size_t>(x.numel()));
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep;
  return mul(x, Tensor::from_vector(x.shape(), std::move(mask), x.dtype()));
}

Tensor log_softmax(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw DimensionError("log_softmax expects [N,K], got " + shape_str(logits.shape()));
  }
  const std::int64_t n = logits.dim(0);
  const std::int64_t k = logits.dim(1);
  std::vector<double> row_max(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < k; ++j) m = std::max(m, logits.value(i * k + j));
    row_max[i] = m;
  }
  const Tensor shifted = logits - Tensor::from_vector({n, 1}, std::move(row_max), logits.dtype());
  return shifted - log(sum_to(exp(shifted), {n, 1}));
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || static_cast<std::int64_t>(labels.size()) != logits.dim(0)) {
    throw DimensionError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::int64_t n = logits.dim(0);
  const std::int64_t k = logits.dim(1);
  std::vector<double> onehot(static_cast<std::size_t>(n * k), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(labels[i]) +
                                  " outside [0," + std::to_string(k) + ")");
    }
    onehot[i * k + labels[i]] = 1.0;
  }
  const Tensor picked = log_softmax(logits) * Tensor::from_vector({n, k}, std::move(onehot), logits.dtype());
  return sum(picked) * (-1.0 / static_cast<double>(n));
}

}  // namespace embryoforge

// Independent reference implementations used as test oracles. Nothing here
// calls into the autodiff engine's kernels or backward rules.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "embryoforge/rng.hpp"
#include "embryoforge/tensor.hpp"

namespace oracle {

using embryoforge::Shape;
using embryoforge::Tensor;

inline Tensor random_tensor(const Shape& shape, embryoforge::Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(embryoforge::shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_vector(shape, std::move(v));
}

/// Quadruple-loop cross-correlation with zero padding.
inline std::vector<double> conv2d(const std::vector<double>& x, const Shape& xs,
                                  const std::vector<double>& k, const Shape& ks, int stride,
                                  int pad, std::int64_t* oh_out = nullptr,
                                  std::int64_t* ow_out = nullptr) {
  const auto n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const auto o = ks[0], kh = ks[2], kw = ks[3];
  const auto oh = (h + 2 * pad - kh) / stride + 1;
  const auto ow = (w + 2 * pad - kw) / stride + 1;
  if (oh_out) *oh_out = oh;
  if (ow_out) *ow_out = ow;
  std::vector<double> out(static_cast<std::size_t>(n * o * oh * ow), 0.0);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t oc = 0; oc < o; ++oc)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t xx = 0; xx < ow; ++xx) {
          double acc = 0.0;
          for (std::int64_t ic = 0; ic < c; ++ic)
            for (std::int64_t i = 0; i < kh; ++i)
              for (std::int64_t j = 0; j < kw; ++j) {
                const auto iy = y * stride - pad + i;
                const auto ix = xx * stride - pad + j;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += x[((b * c + ic) * h + iy) * w + ix] * k[((oc * c + ic) * kh + i) * kw + j];
              }
          out[((b * o + oc) * oh + y) * ow + xx] = acc;
        }
  return out;
}

inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::int64_t m, std::int64_t k, std::int64_t n) {
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
      out[i * n + j] = acc;
    }
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/// Central finite differences of a scalar function of a flat parameter vector.
inline std::vector<double> central_fd(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_rel_error(const std::vector<double>& got, const std::vector<double>& want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    worst = std::max(worst, std::abs(got[i] - want[i]) / std::max(1.0, std::abs(want[i])));
  }
  return worst;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

/// Median of each clamped (2r+1)^3 window, by sorting the full window.
inline std::vector<std::uint16_t> median_3d(const std::vector<std::uint16_t>& v, int w, int h,
                                            int d, int r) {
  std::vector<std::uint16_t> out(v.size());
  auto idx = [&](int x, int y, int z) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    z = std::clamp(z, 0, d - 1);
    return (static_cast<std::size_t>(z) * h + y) * w + x;
  };
  for (int z = 0; z < d; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::vector<std::uint16_t> win;
        for (int dz = -r; dz <= r; ++dz)
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) win.push_back(v[idx(x + dx, y + dy, z + dz)]);
        std::sort(win.begin(), win.end());
        out[idx(x, y, z)] = win[win.size() / 2];
      }
  return out;
}

}  // namespace oracle

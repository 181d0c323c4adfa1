#include "embryoforge/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "embryoforge/autograd.hpp"
#include "embryoforge/ops.hpp"

namespace embryoforge {

namespace {

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

struct Case {
  std::vector<Tensor> inputs;
  Fn fn;
};

using Maker = std::function<Case(Rng&)>;

Tensor rand_t(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_vector(s, std::move(v));
}

/// Values bounded away from zero by `gap`, either sign.
Tensor rand_away(const Shape& s, Rng& rng, double gap) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(s)));
  for (auto& x : v) x = (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(gap, 1.0);
  return Tensor::from_vector(s, std::move(v));
}

std::int64_t pick(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

Shape rand_shape(Rng& rng, int max_rank = 3) {
  Shape s(static_cast<std::size_t>(pick(rng, 1, max_rank)));
  for (auto& d : s) d = pick(rng, 1, 4);
  return s;
}

/// A shape that broadcasts against `s`: some axes set to 1, maybe fewer axes.
Shape broadcastable(const Shape& s, Rng& rng) {
  Shape t(s.begin() + static_cast<std::ptrdiff_t>(rng.below(s.size())), s.end());
  for (auto& d : t)
    if (rng.bernoulli(0.4)) d = 1;
  return t;
}

Case binary(Rng& rng, Tensor (*op)(const Tensor&, const Tensor&), bool positive_rhs) {
  const Shape s = rand_shape(rng);
  Shape t = broadcastable(s, rng);
  Shape a = s, b = t;
  if (rng.bernoulli(0.5)) std::swap(a, b);
  Tensor rhs = positive_rhs ? rand_t(b, rng, 0.5, 2.0) : rand_t(b, rng);
  return {{rand_t(a, rng), rhs}, [op](const std::vector<Tensor>& in) { return op(in[0], in[1]); }};
}

Case unary(Rng& rng, Tensor (*op)(const Tensor&), double lo, double hi) {
  return {{rand_t(rand_shape(rng), rng, lo, hi)}, [op](const std::vector<Tensor>& in) { return op(in[0]); }};
}

struct ConvGeom {
  std::int64_t n, c, o, h, w, kh, kw;
  int stride, pad;
};

ConvGeom conv_geom(Rng& rng) {
  ConvGeom g{};
  g.n = pick(rng, 1, 2);
  g.c = pick(rng, 1, 3);
  g.o = pick(rng, 1, 3);
  g.kh = pick(rng, 1, 4);
  g.kw = pick(rng, 1, 4);
  g.stride = static_cast<int>(pick(rng, 1, 3));
  g.pad = static_cast<int>(pick(rng, 0, std::min<std::int64_t>(2, std::min(g.kh, g.kw) - 1)));
  g.h = pick(rng, g.kh, g.kh + 5);
  g.w = pick(rng, g.kw, g.kw + 5);
  return g;
}

std::vector<std::pair<std::string, Maker>> suite() {
  std::vector<std::pair<std::string, Maker>> s;
  s.emplace_back("add", [](Rng& r) { return binary(r, add, false); });
  s.emplace_back("sub", [](Rng& r) { return binary(r, sub, false); });
  s.emplace_back("mul", [](Rng& r) { return binary(r, mul, false); });
  s.emplace_back("div", [](Rng& r) { return binary(r, div, true); });
  s.emplace_back("neg", [](Rng& r) { return unary(r, neg, -1, 1); });
  s.emplace_back("square", [](Rng& r) { return unary(r, square, -2, 2); });
  s.emplace_back("sqrt", [](Rng& r) { return unary(r, sqrt, 0.3, 3); });
  s.emplace_back("exp", [](Rng& r) { return unary(r, exp, -2, 2); });
  s.emplace_back("log", [](Rng& r) { return unary(r, log, 0.3, 3); });
  s.emplace_back("tanh", [](Rng& r) { return unary(r, tanh, -2, 2); });
  s.emplace_back("sigmoid", [](Rng& r) { return unary(r, sigmoid, -3, 3); });
  s.emplace_back("leaky_relu", [](Rng& r) {
    const double slope = r.uniform(0.0, 0.5);
    return Case{{rand_away(rand_shape(r), r, 0.01)},
                [slope](const std::vector<Tensor>& in) { return leaky_relu(in[0], slope); }};
  });
  s.emplace_back("clamp", [](Rng& r) {
    // Keep samples off the clamp boundaries.
    std::vector<double> v(static_cast<std::size_t>(pick(r, 2, 12)));
    for (auto& x : v) x = r.bernoulli(0.5) ? r.uniform(-0.45, 0.45) : (r.bernoulli(0.5) ? 1 : -1) * r.uniform(0.55, 1.0);
    const auto n = static_cast<std::int64_t>(v.size());
    return Case{{Tensor::from_vector({n}, v)},
                [](const std::vector<Tensor>& in) { return clamp(in[0], -0.5, 0.5); }};
  });
  s.emplace_back("sum", [](Rng& r) {
    return Case{{rand_t(rand_shape(r), r)}, [](const std::vector<Tensor>& in) { return sum(in[0]); }};
  });
  s.emplace_back("mean", [](Rng& r) {
    return Case{{rand_t(rand_shape(r), r)}, [](const std::vector<Tensor>& in) { return mean(in[0]); }};
  });
  s.emplace_back("sum_to", [](Rng& r) {
    const Shape big = rand_shape(r);
    const Shape small = broadcastable(big, r);
    return Case{{rand_t(big, r)}, [small](const std::vector<Tensor>& in) { return sum_to(in[0], small); }};
  });
  s.emplace_back("broadcast_to", [](Rng& r) {
    const Shape big = rand_shape(r);
    const Shape small = broadcastable(big, r);
    return Case{{rand_t(small, r)}, [big](const std::vector<Tensor>& in) { return broadcast_to(in[0], big); }};
  });
  s.emplace_back("reshape", [](Rng& r) {
    const Shape a = rand_shape(r);
    Shape b{shape_numel(a)};
    if (r.bernoulli(0.5)) b = {1, shape_numel(a), 1};
    return Case{{rand_t(a, r)}, [b](const std::vector<Tensor>& in) { return reshape(in[0], b); }};
  });
  s.emplace_back("flatten", [](Rng& r) {
    const Shape a{pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 3)};
    return Case{{rand_t(a, r)}, [](const std::vector<Tensor>& in) { return flatten(in[0]); }};
  });
  s.emplace_back("transpose", [](Rng& r) {
    return Case{{rand_t({pick(r, 1, 5), pick(r, 1, 5)}, r)},
                [](const std::vector<Tensor>& in) { return transpose(in[0]); }};
  });
  s.emplace_back("matmul", [](Rng& r) {
    const auto m = pick(r, 1, 5), k = pick(r, 1, 5), n = pick(r, 1, 5);
    return Case{{rand_t({m, k}, r), rand_t({k, n}, r)},
                [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); }};
  });
  s.emplace_back("dense", [](Rng& r) {
    const auto m = pick(r, 1, 5), k = pick(r, 1, 5), n = pick(r, 1, 5);
    return Case{{rand_t({m, k}, r), rand_t({k, n}, r), rand_t({n}, r)},
                [](const std::vector<Tensor>& in) { return dense(in[0], in[1], in[2]); }};
  });
  s.emplace_back("conv2d", [](Rng& r) {
    const auto g = conv_geom(r);
    return Case{{rand_t({g.n, g.c, g.h, g.w}, r), rand_t({g.o, g.c, g.kh, g.kw}, r)},
                [g](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], g.stride, g.pad); }};
  });
  s.emplace_back("conv2d_transpose", [](Rng& r) {
    const auto g = conv_geom(r);
    const auto ih = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
    const auto iw = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
    const std::pair<std::int64_t, std::int64_t> hw{g.h, g.w};
    return Case{{rand_t({g.n, g.o, ih, iw}, r), rand_t({g.o, g.c, g.kh, g.kw}, r)},
                [g, hw](const std::vector<Tensor>& in) {
                  return conv2d_transpose(in[0], in[1], g.stride, g.pad, hw);
                }};
  });
  s.emplace_back("conv2d_kernel_grad", [](Rng& r) {
    const auto g = conv_geom(r);
    const auto oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
    const auto ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
    return Case{{rand_t({g.n, g.c, g.h, g.w}, r), rand_t({g.n, g.o, oh, ow}, r)},
                [g](const std::vector<Tensor>& in) {
                  return conv2d_kernel_grad(in[0], in[1], g.stride, g.pad, g.kh, g.kw);
                }};
  });
  s.emplace_back("batch_norm", [](Rng& r) {
    const auto n = pick(r, 2, 4), c = pick(r, 1, 3);
    Shape xs{n, c};
    if (r.bernoulli(0.5)) xs = {n, c, pick(r, 1, 3), pick(r, 1, 3)};
    return Case{{rand_t(xs, r), rand_t({c}, r, 0.5, 1.5), rand_t({c}, r)},
                [c](const std::vector<Tensor>& in) {
                  BatchNormStats stats{Tensor::zeros({c}), Tensor::ones({c})};
                  return batch_norm(in[0], in[1], in[2], 1e-5, NormMode::train, stats);
                }};
  });
  s.emplace_back("layer_norm", [](Rng& r) {
    const auto n = pick(r, 1, 3), c = pick(r, 1, 3);
    Shape xs{n, c, pick(r, 1, 3), pick(r, 1, 3)};
    if (c * xs[2] * xs[3] < 2) xs[3] = 2;
    return Case{{rand_t(xs, r), rand_t({c}, r, 0.5, 1.5), rand_t({c}, r)},
                [](const std::vector<Tensor>& in) { return layer_norm(in[0], in[1], in[2]); }};
  });
  s.emplace_back("dropout", [](Rng& r) {
    const double rate = r.uniform(0.1, 0.7);
    const std::uint64_t seed = r.next_u64();
    return Case{{rand_t(rand_shape(r), r)}, [rate, seed](const std::vector<Tensor>& in) {
                  Rng mask(seed);
                  return dropout(in[0], rate, true, mask);
                }};
  });
  s.emplace_back("log_softmax", [](Rng& r) {
    return Case{{rand_t({pick(r, 1, 4), pick(r, 2, 5)}, r, -3, 3)},
                [](const std::vector<Tensor>& in) { return log_softmax(in[0]); }};
  });
  s.emplace_back("cross_entropy", [](Rng& r) {
    const auto n = pick(r, 1, 5), k = pick(r, 2, 5);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) l = static_cast<int>(r.below(static_cast<std::uint64_t>(k)));
    return Case{{rand_t({n, k}, r, -3, 3)},
                [labels](const std::vector<Tensor>& in) { return cross_entropy(in[0], labels); }};
  });
  return s;
}

double check_case(const Case& c, Rng& rng, double h) {
  std::vector<Tensor> inputs;
  for (const auto& t : c.inputs) inputs.push_back(t.detach().requires_grad_());
  const Tensor out = c.fn(inputs);
  const Tensor weights = rand_t(out.shape(), rng);
  auto probe = [&](const std::vector<Tensor>& in) { return sum(c.fn(in) * weights); };
  const auto analytic = grad(probe(inputs), inputs);
  double worst = 0;
  NoGradGuard ng;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto base = inputs[k].to_vector();
    for (std::size_t i = 0; i < base.size(); ++i) {
      auto shifted = inputs;
      auto v = base;
      v[i] = base[i] + h;
      shifted[k] = Tensor::from_vector(inputs[k].shape(), v);
      const double up = probe(shifted).item();
      v[i] = base[i] - h;
      shifted[k] = Tensor::from_vector(inputs[k].shape(), v);
      const double down = probe(shifted).item();
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[k].value(static_cast<std::int64_t>(i));
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

}  // namespace

std::vector<std::string> gradcheck_ops() {
  std::vector<std::string> names;
  for (const auto& [name, maker] : suite()) names.push_back(name);
  return names;
}

std::vector<GradcheckResult> run_gradcheck(int cases, double threshold, std::uint64_t seed,
                                           double step) {
  if (cases < 1) throw std::invalid_argument("gradcheck needs at least one case per op");
  std::vector<GradcheckResult> results;
  for (const auto& [name, maker] : suite()) {
    Rng rng(derive_seed(seed, name));
    GradcheckResult res;
    res.op = name;
    for (int i = 0; i < cases; ++i) {
      const Case c = maker(rng);
      const double err = check_case(c, rng, step);
      res.max_rel_error = std::max(res.max_rel_error, std::isnan(err) ? INFINITY : err);
      ++res.cases;
    }
    res.passed = res.max_rel_error < threshold;
    results.push_back(res);
  }
  return results;
}

}  // namespace embryoforge

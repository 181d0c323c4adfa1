#pragma once

#include <optional>
#include <span>
#include <utility>

#include "embryoforge/rng.hpp"
#include "embryoforge/tensor.hpp"

namespace embryoforge {

// Elementwise arithmetic with numpy-style broadcasting. Operands must share
// a dtype.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, double b);
Tensor operator-(const Tensor& a, double b);
Tensor operator*(const Tensor& a, double b);
Tensor operator/(const Tensor& a, double b);
Tensor operator+(double a, const Tensor& b);
Tensor operator-(double a, const Tensor& b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(double a, const Tensor& b);
Tensor operator-(const Tensor& a);

Tensor neg(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// max(x, slope*x); the subgradient at exactly 0 is `slope`.
Tensor leaky_relu(const Tensor& x, double slope = 0.2);

/// Clamp into [lo, hi]; gradient is zero where clamping is active.
Tensor clamp(const Tensor& x, double lo, double hi);

/// Sum of all elements, rank-0 result.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Reduces x to `shape` by summing over broadcast axes; inverse of
/// broadcast_to.
Tensor sum_to(const Tensor& x, const Shape& shape);
Tensor broadcast_to(const Tensor& x, const Shape& shape);
Shape broadcast_shapes(const Shape& a, const Shape& b);

Tensor reshape(const Tensor& x, const Shape& shape);
/// [N, ...] -> [N, prod(...)].
Tensor flatten(const Tensor& x);
/// 2-D transpose.
Tensor transpose(const Tensor& x);
/// [M,K] x [K,N] -> [M,N].
Tensor matmul(const Tensor& a, const Tensor& b);

/// out[n,g] = sum_f in[n,f] * weight[f,g] + bias[g].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

enum class Padding { valid, half };

/// Pixels of zero padding on each side. `half` pads (k-1)/2, which makes a
/// 4x4 stride-2 convolution halve even spatial sizes exactly.
int padding_pixels(Padding padding, std::int64_t kernel_size);

/// Cross-correlation of [N,C_in,H,W] with a [C_out,C_in,kH,kW] kernel.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride,
              Padding padding = Padding::half);
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);

/// Adjoint of conv2d in its input: maps [N,C_in,H,W] through a
/// [C_in,C_out,kH,kW] kernel to [N,C_out,H',W'] with
/// H' = (H-1)*stride - 2*pad + kH unless `output_hw` overrides it.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride,
                        Padding padding = Padding::half,
                        std::optional<std::pair<std::int64_t, std::int64_t>> output_hw = {});
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride, int pad,
                        std::optional<std::pair<std::int64_t, std::int64_t>> output_hw = {});

/// Gradient of <conv2d(input, K), grad_output> with respect to K, as a
/// differentiable op of (input, grad_output).
Tensor conv2d_kernel_grad(const Tensor& input, const Tensor& grad_output, int stride,
                          int pad, std::int64_t kernel_h, std::int64_t kernel_w);

enum class NormMode { train, eval };

/// Running statistics for batch_norm. Updated in train mode as
/// running = momentum * running + (1 - momentum) * batch.
struct BatchNormStats {
  Tensor mean;
  Tensor var;
  double momentum = 0.9;
};

/// Per-channel normalization over the batch and spatial axes of [N,C,...].
/// Train mode uses the biased batch variance and requires N >= 2.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  NormMode mode, BatchNormStats& stats);

/// Per-sample normalization over all non-batch axes with a per-channel
/// affine (channel = axis 1).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// Inverted dropout: survivors are scaled by 1/(1-rate) at train time.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

/// Row-wise log-softmax of [N,K].
Tensor log_softmax(const Tensor& logits);
/// Mean negative log-likelihood of integer labels under softmax(logits).
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Constant tensor of the same shape/dtype as x.
Tensor zeros_like(const Tensor& x);
Tensor full_like(const Tensor& x, double value);

}  // namespace embryoforge

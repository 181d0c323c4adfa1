#pragma once

#include <vector>

#include "embryoforge/tensor.hpp"

namespace embryoforge {

/// Reverse-mode gradients of a scalar `loss` with respect to each tensor in
/// `wrt`, returned in the same order. A target the loss does not depend on
/// gets a zero gradient. With `higher_order` the gradients are recorded as
/// graph nodes and can themselves be differentiated.
std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& wrt,
                         bool higher_order = false);

}  // namespace embryoforge

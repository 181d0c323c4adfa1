#include "embryoforge/autograd.hpp"

#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "embryoforge/ops.hpp"

namespace embryoforge {

namespace {

using Impl = const detail::TensorImpl*;

// Post-order over the recorded graph: every tensor appears after its inputs.
std::vector<Tensor> topological_order(const Tensor& root) {
  std::vector<Tensor> order;
  std::unordered_set<Impl> visited;
  struct Frame {
    Tensor t;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({root});
  visited.insert(detail_impl(root));
  while (!stack.empty()) {
    auto& top = stack.back();
    const auto& fn = top.t.grad_fn();
    if (fn && top.next < fn->inputs.size()) {
      const Tensor& in = fn->inputs[top.next++];
      if (in.defined() && in.requires_grad() && visited.insert(detail_impl(in)).second) {
        stack.push_back({in});
      }
      continue;
    }
    order.push_back(top.t);
    stack.pop_back();
  }
  return order;
}

}  // namespace

std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& wrt, bool higher_order) {
  if (!loss.defined() || loss.numel() != 1) {
    throw DimensionError("grad: loss must be a scalar, got shape " +
                         (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  std::unordered_set<Impl> targets;
  for (const auto& t : wrt) {
    if (!t.defined() || !t.requires_grad()) {
      throw std::invalid_argument("grad: differentiation target does not require grad");
    }
    targets.insert(detail_impl(t));
  }

  std::unique_ptr<NoGradGuard> no_grad;
  std::unique_ptr<EnableGradGuard> with_grad;
  if (higher_order) {
    with_grad = std::make_unique<EnableGradGuard>();
  } else {
    no_grad = std::make_unique<NoGradGuard>();
  }

  std::unordered_map<Impl, Tensor> grads;
  if (loss.requires_grad()) {
    const auto order = topological_order(loss);

    // A tensor needs a gradient iff some target is reachable from it.
    std::unordered_set<Impl> needed;
    for (const auto& t : order) {
      const Impl id = detail_impl(t);
      bool need = targets.contains(id);
      if (!need && t.grad_fn()) {
        for (const auto& in : t.grad_fn()->inputs) {
          if (in.defined() && needed.contains(detail_impl(in))) {
            need = true;
            break;
          }
        }
      }
      if (need) needed.insert(id);
    }

    grads[detail_impl(loss)] = Tensor::ones(loss.shape(), loss.dtype());
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Tensor& t = *it;
      const auto& fn = t.grad_fn();
      if (!fn || !needed.contains(detail_impl(t))) continue;
      auto g = grads.find(detail_impl(t));
      if (g == grads.end()) continue;
      std::vector<bool> need(fn->inputs.size());
      bool any = false;
      for (std::size_t i = 0; i < need.size(); ++i) {
        const auto& in = fn->inputs[i];
        need[i] = in.defined() && in.requires_grad() && needed.contains(detail_impl(in));
        any = any || need[i];
      }
      if (!any) continue;
      const Tensor upstream = g->second;
      if (!targets.contains(detail_impl(t))) grads.erase(g);
      const auto input_grads = fn->backward(upstream, need);
      for (std::size_t i = 0; i < need.size(); ++i) {
        if (!need[i] || !input_grads[i].defined()) continue;
        const Impl id = detail_impl(fn->inputs[i]);
        auto [slot, inserted] = grads.try_emplace(id, input_grads[i]);
        if (!inserted) slot->second = add(slot->second, input_grads[i]);
      }
    }
  }

  std::vector<Tensor> result;
  result.reserve(wrt.size());
  for (const auto& t : wrt) {
    auto it = grads.find(detail_impl(t));
    result.push_back(it != grads.end() ? it->second : zeros_like(t));
  }
  return result;
}

}  // namespace embryoforge

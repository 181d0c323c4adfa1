#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace embryoforge {

struct GradcheckResult {
  std::string op;
  int cases = 0;
  /// max over cases and input elements of |analytic - numeric| / max(1, |numeric|).
  double max_rel_error = 0;
  bool passed = false;
};

/// Names of every differentiable op covered by the suite, in report order.
std::vector<std::string> gradcheck_ops();

/// Central finite-difference check of every differentiable op in f64 on
/// `cases` random inputs each. The probe loss is sum(op(inputs) * R) for a
/// fixed random R.
std::vector<GradcheckResult> run_gradcheck(int cases = 20, double threshold = 1e-5,
                                           std::uint64_t seed = 2024, double step = 1e-6);

}  // namespace embryoforge

#include <gtest/gtest.h>

#include <set>

#include "embryoforge/gradcheck.hpp"

using namespace embryoforge;

TEST(Gradcheck, CoversEveryOpOnce) {
  const auto ops = gradcheck_ops();
  const std::set<std::string> unique(ops.begin(), ops.end());
  EXPECT_EQ(unique.size(), ops.size());
  for (const char* name : {"add", "mul", "div", "sqrt", "log", "leaky_relu", "sum_to", "matmul",
                           "conv2d", "conv2d_transpose", "conv2d_kernel_grad", "batch_norm",
                           "layer_norm", "dropout", "cross_entropy"})
    EXPECT_TRUE(unique.count(name)) << name;
}

TEST(Gradcheck, AllOpsMatchFiniteDifferences) {
  for (const auto& r : run_gradcheck(20, 1e-5, 7)) {
    EXPECT_EQ(r.cases, 20) << r.op;
    EXPECT_TRUE(r.passed) << r.op << " max rel error " << r.max_rel_error;
  }
}

TEST(Gradcheck, ThresholdIsApplied) {
  // Errors are compared with a strict less-than, so zero is never met.
  const auto results = run_gradcheck(1, 0.0, 7);
  for (const auto& r : results) EXPECT_FALSE(r.passed) << r.op;
  EXPECT_THROW(run_gradcheck(0), std::invalid_argument);
}

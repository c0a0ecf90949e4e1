#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cachemt/numeric/parameter_store.hpp"

namespace cachemt::numeric {

// A loss callback evaluates the loss at the store's current values and
// writes the analytic gradient into the store's grad buffers (it is
// responsible for zeroing them first).
using LossFunction = std::function<double(ParameterStore&)>;

struct ParameterCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradientCheckReport {
  std::vector<ParameterCheck> parameters;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

// Compares the analytic gradient of every trainable scalar against a central
// finite difference using |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8).
// Throws ContractError if eps <= 0 or if two evaluations of `loss` at the same
// point disagree.
GradientCheckReport gradient_check(const LossFunction& loss, ParameterStore& params, double eps,
                                   double tol);

}  // namespace cachemt::numeric

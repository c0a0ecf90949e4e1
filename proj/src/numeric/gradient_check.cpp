#include "cachemt/numeric/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cachemt/error.hpp"

namespace cachemt::numeric {

GradientCheckReport gradient_check(const LossFunction& loss, ParameterStore& params, double eps,
                                   double tol) {
  if (!(eps > 0.0)) throw ContractError("gradient_check: eps must be positive");

  const double first = loss(params);
  std::map<std::string, Tensor> analytic;
  for (auto& [name, entry] : params) {
    if (entry.trainable) analytic.emplace(name, entry.grad);
  }
  const double second = loss(params);
  if (std::memcmp(&first, &second, sizeof(double)) != 0) {
    throw ContractError("gradient_check: loss function is not deterministic");
  }

  GradientCheckReport report;
  for (auto& [name, entry] : params) {
    if (!entry.trainable) continue;
    ParameterCheck check;
    check.name = name;
    const Tensor& grad = analytic.at(name);
    auto values = entry.value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + eps;
      const double plus = loss(params);
      values[i] = original - eps;
      const double minus = loss(params);
      values[i] = original;

      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = grad[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++check.checked;
      if (check.checked == 1 || rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = i;
        check.worst_analytic = a;
        check.worst_numeric = numeric;
      }
    }
    report.checked += check.checked;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.parameters.push_back(std::move(check));
  }
  // Leave the store's gradients at the unperturbed point.
  loss(params);
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace cachemt::numeric

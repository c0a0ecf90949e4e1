#pragma once

#include <cmath>

#include "cachemt/numeric/tensor.hpp"

namespace cachemt::numeric {

// Max-subtracted softmax. Throws ContractError on an empty input.
Vector softmax_stable(const Vector& logits);
Vector log_softmax(const Vector& logits);

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& x);

}  // namespace cachemt::numeric

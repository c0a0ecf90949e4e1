#include "cachemt/numeric/ops.hpp"

#include "cachemt/error.hpp"

namespace cachemt::numeric {

Vector softmax_stable(const Vector& logits) {
  if (logits.size() == 0) throw ContractError("softmax of an empty vector");
  const double max = logits.maxCoeff();
  Vector out = (logits.array() - max).exp();
  out /= out.sum();
  return out;
}

Vector log_softmax(const Vector& logits) {
  if (logits.size() == 0) throw ContractError("log-softmax of an empty vector");
  const double max = logits.maxCoeff();
  const double log_z = max + std::log((logits.array() - max).exp().sum());
  return logits.array() - log_z;
}

Vector sigmoid(const Vector& x) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  return out;
}

}  // namespace cachemt::numeric

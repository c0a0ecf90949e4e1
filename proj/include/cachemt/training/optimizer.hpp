#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "cachemt/numeric/parameter_store.hpp"

namespace cachemt::training {

enum class OptimizerKind { Sgd, Adadelta, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 0.1;
  double clip_norm = 1.0;  // global gradient norm
  double rho = 0.95;       // adadelta
  double epsilon = 1e-6;   // adadelta and adam
  double beta1 = 0.9;      // adam
  double beta2 = 0.999;    // adam

  void validate() const;
};

// Updates trainable entries only; frozen entries are never written.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  // Scales the gradients by `grad_scale`, clips, applies one update and
  // returns the gradient norm before clipping. Throws DivergenceError on a
  // non-finite gradient.
  double step(numeric::ParameterStore& params, double grad_scale = 1.0);

  std::size_t steps() const noexcept { return steps_; }

 private:
  struct Slot {
    numeric::Tensor first;
    numeric::Tensor second;
  };

  OptimizerConfig config_;
  std::map<std::string, Slot> state_;
  std::size_t steps_ = 0;
};

}  // namespace cachemt::training

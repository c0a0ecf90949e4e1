#include "cachemt/training/optimizer.hpp"

#include <cmath>

#include "cachemt/error.hpp"

namespace cachemt::training {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd:
      return "sgd";
    case OptimizerKind::Adadelta:
      return "adadelta";
    case OptimizerKind::Adam:
      return "adam";
  }
  return "sgd";
}

OptimizerKind parse_optimizer(const std::string& text) {
  if (text == "sgd") return OptimizerKind::Sgd;
  if (text == "adadelta") return OptimizerKind::Adadelta;
  if (text == "adam") return OptimizerKind::Adam;
  throw ContractError("unknown optimizer: " + text);
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be positive");
  if (!(clip_norm > 0.0)) throw ContractError("clip_norm must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw ContractError("rho must be in (0, 1)");
  if (!(epsilon > 0.0)) throw ContractError("epsilon must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractError("adam betas must be in [0, 1)");
  }
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) { config_.validate(); }

double Optimizer::step(numeric::ParameterStore& params, double grad_scale) {
  double sq = 0.0;
  for (auto& [name, entry] : params) {
    if (!entry.trainable) continue;
    entry.grad.flat() *= grad_scale;
    sq += entry.grad.flat().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw DivergenceError("non-finite gradient");
  const double clip = norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;
  ++steps_;

  for (auto& [name, entry] : params) {
    if (!entry.trainable) continue;
    auto g = entry.grad.flat();
    if (clip != 1.0) g *= clip;
    auto x = entry.value.flat();
    auto [it, inserted] = state_.try_emplace(name);
    Slot& slot = it->second;
    if (inserted) {
      slot.first = numeric::Tensor(entry.value.shape());
      slot.second = numeric::Tensor(entry.value.shape());
    }
    auto m = slot.first.flat();
    auto v = slot.second.flat();
    switch (config_.kind) {
      case OptimizerKind::Sgd:
        x -= config_.learning_rate * g;
        break;
      case OptimizerKind::Adadelta: {
        // m: running E[g^2], v: running E[dx^2]
        const double rho = config_.rho;
        const double eps = config_.epsilon;
        m = rho * m + (1.0 - rho) * g.cwiseAbs2();
        const numeric::Vector dx =
            -((v.array() + eps).sqrt() / (m.array() + eps).sqrt() * g.array()).matrix();
        v = rho * v + (1.0 - rho) * dx.cwiseAbs2();
        x += config_.learning_rate * dx;
        break;
      }
      case OptimizerKind::Adam: {
        const double b1 = config_.beta1;
        const double b2 = config_.beta2;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
        x.array() -= config_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
        break;
      }
    }
  }
  return norm;
}

}  // namespace cachemt::training

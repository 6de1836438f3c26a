#include "kln/optim.hpp"

#include <cmath>

#include "kln/error.hpp"

namespace kln {

Optimizer::Optimizer(OptimizerConfig config) : config_(std::move(config)) {
  std::visit(
      [](const auto& c) {
        if (!(c.lr > 0.0)) throw ConfigError("optimizer: learning rate must be positive");
      },
      config_);
}

double Optimizer::base_lr() const {
  return std::visit([](const auto& c) { return c.lr; }, config_);
}

void Optimizer::update(std::size_t slot, std::span<double> param, std::span<const double> grad,
                       double lr_multiplier) {
  if (param.size() != grad.size()) throw DimensionError("optimizer: parameter/gradient size mismatch");
  if (slot >= slots_.size()) slots_.resize(slot + 1);
  SlotState& s = slots_[slot];
  if (s.m.empty()) {
    s.m.assign(param.size(), 0.0);
    s.v.assign(param.size(), 0.0);
  } else if (s.m.size() != param.size()) {
    throw DimensionError("optimizer: slot " + std::to_string(slot) + " changed size");
  }
  ++s.steps;

  if (const auto* sgd = std::get_if<SgdMomentum>(&config_)) {
    const double lr = sgd->lr * lr_multiplier;
    for (std::size_t i = 0; i < param.size(); ++i) {
      s.m[i] = sgd->momentum * s.m[i] + (grad[i] + sgd->weight_decay * param[i]);
      param[i] -= lr * s.m[i];
    }
    return;
  }
  const auto& adam = std::get<Adam>(config_);
  const double lr = adam.lr * lr_multiplier;
  const double c1 = 1.0 - std::pow(adam.gamma1, static_cast<double>(s.steps));
  const double c2 = 1.0 - std::pow(adam.gamma2, static_cast<double>(s.steps));
  for (std::size_t i = 0; i < param.size(); ++i) {
    s.m[i] = adam.gamma1 * s.m[i] + (1.0 - adam.gamma1) * grad[i];
    s.v[i] = adam.gamma2 * s.v[i] + (1.0 - adam.gamma2) * grad[i] * grad[i];
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + adam.eps);
  }
}

double LrSchedule::multiplier(int epoch) const {
  double m = 1.0;
  for (const auto& [at, factor] : milestones) {
    if (epoch >= at) m *= factor;
  }
  return m;
}

void LrSchedule::validate() const {
  for (const auto& [at, factor] : milestones) {
    if (at < 0) throw ConfigError("lr schedule: milestone epochs must be >= 0");
    if (!(factor > 0.0 && factor <= 1.0)) {
      throw ConfigError("lr schedule: factors must lie in (0, 1]");
    }
  }
}

}  // namespace kln

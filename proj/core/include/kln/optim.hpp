#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace kln {

/// v <- momentum * v + (g + weight_decay * w);  w <- w - lr * v
struct SgdMomentum {
  double lr = 0.02;
  double momentum = 0.9;
  double weight_decay = 0.0005;
};

/// Bias-corrected Adam; gamma1/gamma2 are the first/second moment decays.
struct Adam {
  double lr = 1e-3;
  double gamma1 = 0.9;
  double gamma2 = 0.99;
  double eps = 1e-8;
};

using OptimizerConfig = std::variant<SgdMomentum, Adam>;

/// Stateful optimizer over parameter tensors addressed by a stable slot id.
///
/// Each slot owns its own moment buffers and step count, so slots that sit
/// out a step (frozen sub-networks) keep their state untouched.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  void update(std::size_t slot, std::span<double> param, std::span<const double> grad,
              double lr_multiplier = 1.0);

  double base_lr() const;
  const OptimizerConfig& config() const { return config_; }

 private:
  struct SlotState {
    std::vector<double> m;
    std::vector<double> v;
    long long steps = 0;
  };
  OptimizerConfig config_;
  std::vector<SlotState> slots_;
};

/// Piecewise-constant learning-rate multiplier: every (epoch, factor) whose
/// epoch has been reached multiplies in. Epochs are 0-based.
struct LrSchedule {
  std::vector<std::pair<int, double>> milestones;

  double multiplier(int epoch) const;
  /// Throws ConfigError unless every factor lies in (0, 1] and epochs are >= 0.
  void validate() const;
};

}  // namespace kln

#pragma once

#include <cstdint>
#include <vector>

#include "vfae/tensor.hpp"

namespace vfae {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are laid out in store order.
class Adam {
 public:
  explicit Adam(const ParameterStore& store, AdamConfig cfg = {});

  /// Applies one update from the accumulated gradients, then zeros them.
  /// Throws NumericError naming the first parameter with a non-finite
  /// gradient; parameters are left untouched in that case.
  void step(ParameterStore& store);

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::uint64_t t_ = 0;
};

/// Bias-corrected exponential moving average of parameter values:
///   a_n = decay * a_{n-1} + (1 - decay) * theta_n,   average = a_n / (1 - decay^n).
/// With decay 0 the average is the latest value; before any update it is the
/// value seen at construction.
class ParameterAverager {
 public:
  explicit ParameterAverager(const ParameterStore& store, double decay = 0.999);

  void update(const ParameterStore& store);
  /// Copy of `like` whose values are replaced by the averages.
  ParameterStore averaged(const ParameterStore& like) const;

  double decay() const { return decay_; }
  std::uint64_t updates() const { return n_; }

 private:
  double decay_;
  double decay_pow_ = 1.0;
  std::uint64_t n_ = 0;
  std::vector<Matrix> acc_;
  std::vector<Matrix> initial_;
};

}  // namespace vfae

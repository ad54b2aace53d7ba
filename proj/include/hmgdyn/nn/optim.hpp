#pragma once

#include <span>

#include "hmgdyn/nn/graph.hpp"
#include "hmgdyn/rng.hpp"

namespace hmgdyn::nn {

// rate(i) = initial_rate * decay_rate^(i / decay_step), continuous decay.
struct LearningSchedule {
  double initial_rate = 1e-4;
  long decay_step = 100000;
  double decay_rate = 0.96;

  void validate() const;
  double rate_at(long iteration) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update using each parameter's accumulated grad. iteration >= 1
// selects the learning rate; bias correction uses the parameter's own step
// count so resumed runs continue seamlessly.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, const LearningSchedule& schedule, long iteration,
               const AdamConfig& cfg = {});

// Xavier/Glorot uniform in +-sqrt(6 / (fan_in + fan_out)) for a kernel of
// shape (Cout, Cin, k, k): fan_in = Cin*k*k, fan_out = Cout*k*k.
template <typename T>
Parameter<T> xavier_init(std::string name, Shape shape, Rng& rng);

template <typename T>
Parameter<T> zeros_init(std::string name, Shape shape);

template <typename T>
Parameter<T> constant_init(std::string name, Shape shape, T value);

}  // namespace hmgdyn::nn

#include "hmgdyn/nn/optim.hpp"

#include <cmath>

#include "hmgdyn/error.hpp"

namespace hmgdyn::nn {

void LearningSchedule::validate() const {
  if (!(initial_rate > 0.0)) throw Error(ErrorKind::ConfigInvalid, "learning rate must be positive");
  if (decay_step <= 0) throw Error(ErrorKind::ConfigInvalid, "decay step must be positive");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw Error(ErrorKind::ConfigInvalid, "decay rate must be in (0, 1]");
}

double LearningSchedule::rate_at(long iteration) const {
  return initial_rate * std::pow(decay_rate, static_cast<double>(iteration) / static_cast<double>(decay_step));
}

template <typename T>
void adam_step(std::span<Parameter<T>* const> params, const LearningSchedule& schedule, long iteration,
               const AdamConfig& cfg) {
  if (iteration < 1) throw Error(ErrorKind::ConfigInvalid, "adam iteration must be >= 1");
  const double lr = schedule.rate_at(iteration);
  for (Parameter<T>* p : params) {
    if (!(p->grad.shape == p->value.shape) || !(p->m.shape == p->value.shape) || !(p->v.shape == p->value.shape)) {
      throw Error(ErrorKind::ShapeMismatch, "adam state shape mismatch for " + p->name);
    }
    ++p->steps;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->steps));
    auto& w = p->value.data;
    auto& g = p->grad.data;
    auto& m = p->m.data;
    auto& v = p->v.data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      w[i] = static_cast<T>(w[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
    }
  }
}

template <typename T>
Parameter<T> xavier_init(std::string name, Shape shape, Rng& rng) {
  const double receptive = static_cast<double>(shape.h) * shape.w;
  const double fan_in = shape.c * receptive;
  const double fan_out = shape.n * receptive;
  if (fan_in + fan_out <= 0) throw Error(ErrorKind::ShapeMismatch, "xavier_init needs a non-empty shape");
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor<T> t(shape);
  for (T& v : t.data) v = static_cast<T>(rng.uniform(-limit, limit));
  return Parameter<T>(std::move(name), std::move(t));
}

template <typename T>
Parameter<T> zeros_init(std::string name, Shape shape) {
  return Parameter<T>(std::move(name), Tensor<T>(shape));
}

template <typename T>
Parameter<T> constant_init(std::string name, Shape shape, T value) {
  return Parameter<T>(std::move(name), Tensor<T>(shape, value));
}

template void adam_step<float>(std::span<Parameter<float>* const>, const LearningSchedule&, long, const AdamConfig&);
template void adam_step<double>(std::span<Parameter<double>* const>, const LearningSchedule&, long, const AdamConfig&);
template Parameter<float> xavier_init<float>(std::string, Shape, Rng&);
template Parameter<double> xavier_init<double>(std::string, Shape, Rng&);
template Parameter<float> zeros_init<float>(std::string, Shape);
template Parameter<double> zeros_init<double>(std::string, Shape);
template Parameter<float> constant_init<float>(std::string, Shape, float);
template Parameter<double> constant_init<double>(std::string, Shape, double);

}  // namespace hmgdyn::nn

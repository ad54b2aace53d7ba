#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hmgdyn/nn/tensor.hpp"
#include "hmgdyn/rng.hpp"

namespace hmgdyn::nn {

enum class Mode { Train, Infer };

// Trainable tensor plus its Adam state.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;
  Tensor<T> v;
  long steps = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> init)
      : name(std::move(n)), value(std::move(init)), grad(value.shape), m(value.shape), v(value.shape) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

// Running statistics for batch normalization (one entry per channel).
template <typename T>
struct BatchNormStats {
  std::vector<T> mean;
  std::vector<T> var;
  double momentum = 0.9;
  double eps = 1e-5;

  BatchNormStats() = default;
  explicit BatchNormStats(int channels) : mean(channels, T(0)), var(channels, T(1)) {}
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run tape. Each op appends a node holding its output and a
// backward closure; backward() walks the tape in reverse. A graph is built
// for one forward pass and then discarded. Parameter gradients are
// accumulated into Parameter::grad, so several graphs may contribute to the
// same optimizer step.
template <typename T>
class Graph {
 public:
  struct Seed {
    Var var;
    Tensor<T> grad;
  };

  Var constant(Tensor<T> value);
  Var parameter(Parameter<T>& p);

  const Tensor<T>& value(Var v) const { return nodes_[v.id].value; }
  // Empty tensor when no gradient reached v.
  const Tensor<T>& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

  // Same-padded, stride-1 cross-correlation. Kernel shape (Cout, Cin, k, k),
  // bias shape (1, Cout, 1, 1); k must be odd.
  Var conv2d(Var x, Var kernel, Var bias);
  Var batch_norm(Var x, Var scale, Var shift, BatchNormStats<T>& stats, Mode mode);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var max_pool2(Var x);
  Var avg_pool_global(Var x);
  Var dropout(Var x, double keep_prob, Mode mode, Rng& rng);
  Var upsample2x(Var x);
  Var concat_channels(Var a, Var b);
  Var add(Var a, Var b);

  void backward(std::span<const Seed> seeds);
  void backward(Var out, const Tensor<T>& seed);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    std::function<void()> back;
  };

  Var push(Tensor<T> value, bool requires_grad, std::function<void()> back = {});
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }
  Tensor<T>& grad_buffer(Var v);

  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace hmgdyn::nn

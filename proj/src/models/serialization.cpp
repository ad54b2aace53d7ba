#include "hmgdyn/error.hpp"
#include "hmgdyn/models.hpp"

namespace hmgdyn::models {

using nn::NamedTensor;
using nn::Shape;
using nn::Tensor;

namespace {

NamedTensor named(const std::string& name, const Tensor<float>& t) {
  return NamedTensor{name, {t.shape.n, t.shape.c, t.shape.h, t.shape.w}, t.data};
}

NamedTensor named(const std::string& name, const std::vector<float>& v) {
  return NamedTensor{name, {static_cast<std::int32_t>(v.size())}, v};
}

const NamedTensor& require(const nn::Checkpoint& ckpt, const std::string& name, std::size_t count) {
  const NamedTensor* t = ckpt.find(name);
  if (!t) throw Error(ErrorKind::IoError, "checkpoint is missing tensor " + name);
  if (t->values.size() != count) {
    throw Error(ErrorKind::ShapeMismatch, "checkpoint tensor " + name + " has " + std::to_string(t->values.size()) +
                                              " values, model expects " + std::to_string(count));
  }
  return *t;
}

}  // namespace

// Per parameter: <name>, <name>.adam_m, <name>.adam_v, <name>.adam_steps.
// Per batch norm: <prefix>.running_mean, <prefix>.running_var.
void Mhn::save_tensors(std::vector<NamedTensor>& out) const {
  auto& self = const_cast<Mhn&>(*this);
  for (auto& net : self.nets_) {
    for (nn::Parameter<float>* p : net.parameters()) {
      out.push_back(named(p->name, p->value));
      out.push_back(named(p->name + ".adam_m", p->m));
      out.push_back(named(p->name + ".adam_v", p->v));
      out.push_back(named(p->name + ".adam_steps", std::vector<float>{static_cast<float>(p->steps)}));
    }
    for (auto& [prefix, stats] : net.batch_norms()) {
      out.push_back(named(prefix + ".running_mean", stats->mean));
      out.push_back(named(prefix + ".running_var", stats->var));
    }
  }
}

void Mhn::load_tensors(const nn::Checkpoint& ckpt) {
  for (auto& net : nets_) {
    for (nn::Parameter<float>* p : net.parameters()) {
      const std::size_t n = p->value.size();
      p->value.data = require(ckpt, p->name, n).values;
      // Optimizer state is optional so exported inference weights still load.
      if (ckpt.find(p->name + ".adam_m")) {
        p->m.data = require(ckpt, p->name + ".adam_m", n).values;
        p->v.data = require(ckpt, p->name + ".adam_v", n).values;
        p->steps = static_cast<long>(require(ckpt, p->name + ".adam_steps", 1).values[0]);
      }
    }
    for (auto& [prefix, stats] : net.batch_norms()) {
      stats->mean = require(ckpt, prefix + ".running_mean", stats->mean.size()).values;
      stats->var = require(ckpt, prefix + ".running_var", stats->var.size()).values;
    }
  }
}

}  // namespace hmgdyn::models

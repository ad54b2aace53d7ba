#include <algorithm>
#include <cmath>

#include "hmgdyn/error.hpp"
#include "hmgdyn/models.hpp"
#include "hmgdyn/nn/optim.hpp"

namespace hmgdyn::models {

using nn::Parameter;
using nn::Shape;
using nn::Tensor;

Preset parse_preset(const std::string& name) {
  if (name == "full") return Preset::Full;
  if (name == "desk") return Preset::Desk;
  throw Error(ErrorKind::ConfigInvalid, "unknown preset '" + name + "' (expected full or desk)");
}

std::string preset_name(Preset p) { return p == Preset::Full ? "full" : "desk"; }

void BaseNetConfig::validate() const {
  auto fail = [this](const std::string& m) {
    throw Error(ErrorKind::ConfigInvalid, "Net^" + std::to_string(scale_index) + ": " + m);
  };
  if (scale_index < 0) fail("scale index must be >= 0");
  if (conv_layers < 4 || conv_layers % 2 != 0) fail("conv_layers must be even and >= 4");
  if (static_cast<int>(channel_plan.size()) != conv_layers) fail("channel plan length must equal conv_layers");
  if ((input_size >> (conv_layers / 2)) < 1 || input_size % (1 << (conv_layers / 2)) != 0) {
    fail("input size " + std::to_string(input_size) + " does not survive " + std::to_string(conv_layers / 2) + " pools");
  }
  if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) fail("dropout keep must be in (0, 1]");
  if (in_channels != 2 && in_channels != 4) fail("input must have 2 or 4 channels");
  if (mask_branch && decoder_channels < 1) fail("mask branch needs decoder channels");
  for (int c : channel_plan) {
    if (c < 1) fail("channel widths must be positive");
  }
}

BaseNet::BaseNet(const BaseNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::string prefix = "net" + std::to_string(cfg_.scale_index) + ".";
  int in = cfg_.in_channels;
  for (int i = 0; i < cfg_.conv_layers; ++i) {
    const int out = cfg_.channel_plan[i];
    const std::string p = prefix + "conv" + std::to_string(i) + ".";
    ConvBn layer{nn::xavier_init<float>(p + "weight", Shape{out, in, 3, 3}, rng),
                 nn::zeros_init<float>(p + "bias", Shape{1, out, 1, 1}),
                 nn::constant_init<float>(p + "bn.gamma", Shape{1, out, 1, 1}, 1.0f),
                 nn::zeros_init<float>(p + "bn.beta", Shape{1, out, 1, 1}),
                 nn::BatchNormStats<float>(out)};
    trunk_.push_back(std::move(layer));
    in = out;
  }
  head_ = Conv{nn::xavier_init<float>(prefix + "head.weight", Shape{8, in, 1, 1}, rng),
               nn::zeros_init<float>(prefix + "head.bias", Shape{1, 8, 1, 1})};
  if (cfg_.mask_branch) {
    const int tap = cfg_.channel_plan[3];
    const int dc = cfg_.decoder_channels;
    decoder_.push_back({nn::xavier_init<float>(prefix + "dec0.weight", Shape{dc, tap, 3, 3}, rng),
                        nn::zeros_init<float>(prefix + "dec0.bias", Shape{1, dc, 1, 1})});
    decoder_.push_back({nn::xavier_init<float>(prefix + "dec1.weight", Shape{dc, dc, 3, 3}, rng),
                        nn::zeros_init<float>(prefix + "dec1.bias", Shape{1, dc, 1, 1})});
    decoder_.push_back({nn::xavier_init<float>(prefix + "dec_out.weight", Shape{2, dc, 1, 1}, rng),
                        nn::zeros_init<float>(prefix + "dec_out.bias", Shape{1, 2, 1, 1})});
  }
}

BaseNet::Output BaseNet::forward(nn::Graph<float>& g, Var input, Mode mode, Rng& rng,
                                 const Tensor<float>* incoming_logits) {
  const Shape in = g.value(input).shape;
  if (in.c != cfg_.in_channels || in.h != cfg_.input_size || in.w != cfg_.input_size) {
    throw Error(ErrorKind::ShapeMismatch, "Net^" + std::to_string(cfg_.scale_index) + " expects (B," +
                                              std::to_string(cfg_.in_channels) + "," + std::to_string(cfg_.input_size) +
                                              "," + std::to_string(cfg_.input_size) + "), got " + in.str());
  }
  Var x = input;
  Var tap;
  for (int i = 0; i < cfg_.conv_layers; ++i) {
    ConvBn& l = trunk_[i];
    x = g.conv2d(x, g.parameter(l.w), g.parameter(l.b));
    x = g.batch_norm(x, g.parameter(l.gamma), g.parameter(l.beta), l.stats, mode);
    x = g.relu(x);
    if (i % 2 == 1) {
      x = g.max_pool2(x);
      if (i == 3) tap = x;
    }
  }
  Output out;
  Var pooled = g.avg_pool_global(x);
  pooled = g.dropout(pooled, cfg_.dropout_keep, mode, rng);
  out.displacement = g.conv2d(pooled, g.parameter(head_.w), g.parameter(head_.b));

  if (cfg_.mask_branch) {
    Var d = g.upsample2x(tap);
    d = g.relu(g.conv2d(d, g.parameter(decoder_[0].w), g.parameter(decoder_[0].b)));
    d = g.upsample2x(d);
    d = g.relu(g.conv2d(d, g.parameter(decoder_[1].w), g.parameter(decoder_[1].b)));
    Var logits = g.conv2d(d, g.parameter(decoder_[2].w), g.parameter(decoder_[2].b));
    if (incoming_logits) {
      if (!(incoming_logits->shape == g.value(logits).shape)) {
        throw Error(ErrorKind::ShapeMismatch, "incoming mask logits " + incoming_logits->shape.str() + " vs decoder " +
                                                  g.value(logits).shape.str());
      }
      logits = g.add(logits, g.constant(*incoming_logits));
    }
    out.mask_logits = logits;
    out.masks = g.sigmoid(logits);
  }
  return out;
}

std::vector<Parameter<float>*> BaseNet::parameters() {
  std::vector<Parameter<float>*> ps;
  for (auto& l : trunk_) {
    ps.push_back(&l.w);
    ps.push_back(&l.b);
    ps.push_back(&l.gamma);
    ps.push_back(&l.beta);
  }
  ps.push_back(&head_.w);
  ps.push_back(&head_.b);
  for (auto& c : decoder_) {
    ps.push_back(&c.w);
    ps.push_back(&c.b);
  }
  return ps;
}

std::vector<std::pair<std::string, nn::BatchNormStats<float>*>> BaseNet::batch_norms() {
  std::vector<std::pair<std::string, nn::BatchNormStats<float>*>> out;
  for (int i = 0; i < static_cast<int>(trunk_.size()); ++i) {
    out.emplace_back("net" + std::to_string(cfg_.scale_index) + ".conv" + std::to_string(i) + ".bn", &trunk_[i].stats);
  }
  return out;
}

std::size_t BaseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : trunk_) n += l.w.value.size() + l.b.value.size() + l.gamma.value.size() + l.beta.value.size();
  n += head_.w.value.size() + head_.b.value.size();
  for (const auto& c : decoder_) n += c.w.value.size() + c.b.value.size();
  return n;
}

void BaseNet::zero_final_layers() {
  std::fill(head_.w.value.data.begin(), head_.w.value.data.end(), 0.0f);
  std::fill(head_.b.value.data.begin(), head_.b.value.data.end(), 0.0f);
  if (!decoder_.empty()) {
    std::fill(decoder_.back().w.value.data.begin(), decoder_.back().w.value.data.end(), 0.0f);
    std::fill(decoder_.back().b.value.data.begin(), decoder_.back().b.value.data.end(), 0.0f);
  }
}

std::vector<CornerDisplacement> base_net_forward(BaseNet& net, const Tensor<float>& input, Mode mode, Rng& rng) {
  nn::Graph<float> g;
  const auto out = net.forward(g, g.constant(input), mode, rng, nullptr);
  const Tensor<float>& d = g.value(out.displacement);
  std::vector<CornerDisplacement> rows(d.shape.n);
  for (int b = 0; b < d.shape.n; ++b) {
    for (int i = 0; i < 8; ++i) rows[b].d[i] = d.at(b, i, 0, 0);
  }
  return rows;
}

}  // namespace hmgdyn::models

#include <algorithm>
#include <cmath>

#include "hmgdyn/error.hpp"
#include "hmgdyn/models.hpp"
#include "json.hpp"

namespace hmgdyn::models {

using nlohmann::json;
using nn::Shape;
using nn::Tensor;

void MhnConfig::validate() const {
  if (n_scales < 1 || n_scales > 4) throw Error(ErrorKind::ConfigInvalid, "n_scales must be in [1, 4]");
  if (input_size < 16) throw Error(ErrorKind::ConfigInvalid, "input size must be >= 16");
  if (n_scales > 1 && (input_size >> (n_scales - 1)) < 16) {
    throw Error(ErrorKind::ConfigInvalid, "coarsest level of " + std::to_string(input_size) + " px with " +
                                              std::to_string(n_scales) + " scales is below 16 px");
  }
  if (input_size % (1 << (n_scales - 1)) != 0) {
    throw Error(ErrorKind::ConfigInvalid, "input size must be divisible by 2^(n_scales-1)");
  }
  if (narrow_channels < 1 || wide_channels < 1) throw Error(ErrorKind::ConfigInvalid, "channel widths must be positive");
  for (int k = 0; k < n_scales; ++k) net_config(k).validate();
}

BaseNetConfig MhnConfig::net_config(int k) const {
  BaseNetConfig c;
  c.scale_index = k;
  c.input_size = input_size >> k;
  c.conv_layers = 12 - 2 * k;
  c.channel_plan.resize(std::max(0, c.conv_layers));
  for (int i = 0; i < c.conv_layers; ++i) c.channel_plan[i] = i < 4 ? narrow_channels : wide_channels;
  c.dropout_keep = dropout_keep;
  c.in_channels = (mask_enabled && k < n_scales - 1) ? 4 : 2;
  c.mask_branch = mask_enabled;
  c.decoder_channels = mask_enabled ? narrow_channels : 0;
  return c;
}

MhnConfig MhnConfig::make(Preset preset, bool mask_enabled, int n_scales) {
  MhnConfig c;
  c.preset = preset;
  c.mask_enabled = mask_enabled;
  if (preset == Preset::Full) {
    c.input_size = 128;
    c.n_scales = 3;
    c.narrow_channels = 64;
    c.wide_channels = 128;
  } else {
    c.input_size = 64;
    c.n_scales = 2;
    c.narrow_channels = 16;
    c.wide_channels = 32;
  }
  if (n_scales > 0) c.n_scales = n_scales;
  c.validate();
  return c;
}

std::string MhnConfig::to_json() const {
  return json{{"preset", preset_name(preset)},
              {"n_scales", n_scales},
              {"input_size", input_size},
              {"mask_enabled", mask_enabled},
              {"narrow_channels", narrow_channels},
              {"wide_channels", wide_channels},
              {"dropout_keep", dropout_keep}}
      .dump();
}

MhnConfig MhnConfig::from_json(const std::string& text) {
  MhnConfig c;
  try {
    const json j = json::parse(text);
    c.preset = parse_preset(j.value("preset", std::string("full")));
    c.n_scales = j.at("n_scales").get<int>();
    c.input_size = j.at("input_size").get<int>();
    c.mask_enabled = j.at("mask_enabled").get<bool>();
    c.narrow_channels = j.at("narrow_channels").get<int>();
    c.wide_channels = j.at("wide_channels").get<int>();
    c.dropout_keep = j.value("dropout_keep", 0.8);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

float mask_logit(float p) {
  const float q = std::clamp(p, 1e-4f, 1.0f - 1e-4f);
  return std::log(q / (1.0f - q));
}

GrayImage upsample2x(const GrayImage& img) {
  Tensor<float> t(Shape{1, 1, img.height, img.width});
  t.data = img.data;
  nn::Graph<float> g;
  const Tensor<float>& up = g.value(g.upsample2x(g.constant(std::move(t))));
  GrayImage out;
  out.width = up.shape.w;
  out.height = up.shape.h;
  out.data = up.data;
  return out;
}

Mhn::Mhn(const MhnConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nets_.reserve(cfg_.n_scales);
  for (int k = 0; k < cfg_.n_scales; ++k) nets_.emplace_back(cfg_.net_config(k), mix_seed(seed, k));
}

std::vector<nn::Parameter<float>*> Mhn::parameters() {
  std::vector<nn::Parameter<float>*> all;
  for (auto& n : nets_) {
    auto ps = n.parameters();
    all.insert(all.end(), ps.begin(), ps.end());
  }
  return all;
}

void Mhn::zero_final_layers() {
  for (auto& n : nets_) n.zero_final_layers();
}

namespace {

GrayImage channel_image(const Tensor<float>& t, int n, int c) {
  GrayImage img;
  img.width = t.shape.w;
  img.height = t.shape.h;
  const float* p = t.plane(n, c);
  img.data.assign(p, p + t.shape.plane());
  return img;
}

void put_channel(Tensor<float>& t, int n, int c, const GrayImage& img) {
  std::copy(img.data.begin(), img.data.end(), t.plane(n, c));
}

}  // namespace

std::vector<EstimationResult> Mhn::forward_batch(std::span<const PairView> pairs, Mode mode, Rng& rng,
                                                 const ScaleHook& hook) {
  const int batch = static_cast<int>(pairs.size());
  const int levels = cfg_.n_scales;
  if (batch < 1) throw Error(ErrorKind::ShapeMismatch, "empty batch");

  std::vector<imaging::Pyramid> moving(batch), reference(batch);
  for (int b = 0; b < batch; ++b) {
    const GrayImage& m = *pairs[b].moving;
    const GrayImage& r = *pairs[b].reference;
    if (m.width != cfg_.input_size || m.height != cfg_.input_size || !m.same_size(r)) {
      throw Error(ErrorKind::ShapeMismatch, "model expects two " + std::to_string(cfg_.input_size) + "x" +
                                                std::to_string(cfg_.input_size) + " images, got " +
                                                std::to_string(m.width) + "x" + std::to_string(m.height) + " and " +
                                                std::to_string(r.width) + "x" + std::to_string(r.height));
    }
    moving[b] = imaging::build_pyramid(m, levels);
    reference[b] = imaging::build_pyramid(r, levels);
  }

  std::vector<EstimationResult> results(batch);
  std::vector<Homography> cascade(batch);   // level k+1 units after each step
  std::vector<Homography> pre(batch);
  std::vector<GrayImage> in_mask1(batch), in_mask2(batch);
  bool have_masks = false;

  for (int k = levels - 1; k >= 0; --k) {
    const int s = cfg_.input_size >> k;
    const auto frame = geometry::PatchFrame::square(s);
    BaseNet& net = nets_[k];
    const int cin = net.config().in_channels;

    Tensor<float> input(Shape{batch, cin, s, s});
    Tensor<float> incoming;
    if (have_masks) incoming = Tensor<float>(Shape{batch, 2, s, s});
    for (int b = 0; b < batch; ++b) {
      pre[b] = k == levels - 1 ? Homography::identity() : geometry::to_finer(cascade[b], 1);
      put_channel(input, b, 0, imaging::warp(moving[b].levels[k], pre[b]));
      put_channel(input, b, 1, reference[b].levels[k]);
      if (have_masks) {
        put_channel(input, b, 2, in_mask1[b]);
        put_channel(input, b, 3, in_mask2[b]);
        float* l1 = incoming.plane(b, 0);
        float* l2 = incoming.plane(b, 1);
        for (std::size_t i = 0; i < in_mask1[b].data.size(); ++i) {
          l1[i] = mask_logit(in_mask1[b].data[i]);
          l2[i] = mask_logit(in_mask2[b].data[i]);
        }
      }
    }

    nn::Graph<float> g;
    const Var x = g.constant(std::move(input));
    const BaseNet::Output out = net.forward(g, x, mode, rng, have_masks ? &incoming : nullptr);
    if (hook) {
      ScaleStep step{k, g, out, std::span<const Homography>(pre)};
      hook(step);
    }

    const Tensor<float>& disp = g.value(out.displacement);
    for (int b = 0; b < batch; ++b) {
      ScaleEstimate est;
      est.level = k;
      est.pre_alignment = pre[b];
      bool finite = true;
      for (int i = 0; i < 8; ++i) {
        est.displacement.d[i] = disp.at(b, i, 0, 0);
        finite = finite && std::isfinite(est.displacement.d[i]);
      }
      try {
        if (!finite) throw Error(ErrorKind::SingularMatrix, "non-finite displacement");
        est.residual = geometry::displacement_to_homography(est.displacement, frame);
        est.cascaded = est.residual * pre[b];
      } catch (const Error&) {
        est.displacement = CornerDisplacement{};
        est.residual = Homography::identity();
        est.cascaded = pre[b];
        ++results[b].fallbacks;
      }
      cascade[b] = est.cascaded;
      if (cfg_.mask_enabled) {
        const Tensor<float>& m = g.value(out.masks);
        est.mask1 = channel_image(m, b, 0);
        est.mask2 = channel_image(m, b, 1);
      }
      results[b].scales.push_back(std::move(est));
    }

    if (cfg_.mask_enabled && k > 0) {
      // The next level sees the first image pre-aligned by the cascade, and
      // mask1 already lives in this level's pre-aligned frame, so only this
      // level's residual is still missing.
      for (int b = 0; b < batch; ++b) {
        const ScaleEstimate& est = results[b].scales.back();
        in_mask1[b] = imaging::warp(upsample2x(*est.mask1), geometry::to_finer(est.residual, 1));
        in_mask2[b] = upsample2x(*est.mask2);
      }
      have_masks = true;
    }
  }

  for (int b = 0; b < batch; ++b) results[b].homography = cascade[b];
  return results;
}

EstimationResult Mhn::estimate(const GrayImage& moving, const GrayImage& reference) {
  Rng rng(0);
  const PairView pv{&moving, &reference};
  return std::move(forward_batch(std::span<const PairView>(&pv, 1), Mode::Infer, rng).front());
}

}  // namespace hmgdyn::models

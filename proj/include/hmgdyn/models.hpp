#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmgdyn/geometry.hpp"
#include "hmgdyn/imaging.hpp"
#include "hmgdyn/nn/checkpoint.hpp"
#include "hmgdyn/nn/graph.hpp"

namespace hmgdyn::models {

using geometry::CornerDisplacement;
using geometry::Homography;
using imaging::GrayImage;
using nn::Mode;
using nn::Var;

enum class Preset { Full, Desk };

Preset parse_preset(const std::string& name);
std::string preset_name(Preset p);

struct BaseNetConfig {
  int scale_index = 0;
  int input_size = 128;
  int conv_layers = 12;
  std::vector<int> channel_plan;  // output width of each 3x3 conv
  double dropout_keep = 0.8;
  int in_channels = 2;            // 2 images, or 4 with incoming masks
  bool mask_branch = false;
  int decoder_channels = 0;

  void validate() const;
};

struct MhnConfig {
  Preset preset = Preset::Full;
  int n_scales = 3;
  int input_size = 128;
  bool mask_enabled = false;
  int narrow_channels = 64;  // first four convs
  int wide_channels = 128;   // remaining convs
  double dropout_keep = 0.8;

  void validate() const;
  BaseNetConfig net_config(int k) const;

  // Full: 128 px, 3 scales, 64/128 channels. Desk: 64 px, 2 scales, 16/32.
  static MhnConfig make(Preset preset, bool mask_enabled, int n_scales = 0);

  std::string to_json() const;
  static MhnConfig from_json(const std::string& text);
};

// One Net^k: conv3x3+BN+ReLU stack with a max-pool after every second conv,
// global average pool, dropout and a 1x1 conv to 8 outputs. With the mask
// branch, a decoder taps the trunk after the second pool (quarter
// resolution) and upsamples twice back to the input size.
class BaseNet {
 public:
  struct Output {
    Var displacement;  // (B, 8, 1, 1), level-k pixel units
    Var mask_logits;   // (B, 2, s, s), includes the incoming logits
    Var masks;         // sigmoid(mask_logits)
  };

  BaseNet(const BaseNetConfig& cfg, std::uint64_t seed);

  const BaseNetConfig& config() const { return cfg_; }

  // incoming_logits: (B, 2, s, s) logits of the incoming masks, added to the
  // decoder output before the sigmoid. Null at the coarsest scale.
  Output forward(nn::Graph<float>& g, Var input, Mode mode, Rng& rng, const nn::Tensor<float>* incoming_logits);

  std::vector<nn::Parameter<float>*> parameters();
  std::vector<std::pair<std::string, nn::BatchNormStats<float>*>> batch_norms();
  std::size_t parameter_count() const;

  // Zeroes the 1x1 homography head (and the decoder's output layer).
  void zero_final_layers();

 private:
  struct ConvBn {
    nn::Parameter<float> w, b, gamma, beta;
    nn::BatchNormStats<float> stats;
  };
  struct Conv {
    nn::Parameter<float> w, b;
  };

  BaseNetConfig cfg_;
  std::vector<ConvBn> trunk_;
  Conv head_;
  std::vector<Conv> decoder_;  // two 3x3 stages then the 1x1 output
};

// Runs Net on a (B, C, s, s) tensor and returns the (B, 8) displacement rows.
std::vector<CornerDisplacement> base_net_forward(BaseNet& net, const nn::Tensor<float>& input, Mode mode, Rng& rng);

struct ScaleEstimate {
  int level = 0;
  CornerDisplacement displacement;  // residual, level-k pixels
  Homography residual;              // Net^k output as a homography
  Homography pre_alignment;         // cascade from coarser levels, level-k units
  Homography cascaded;              // residual * pre_alignment, level-k units
  std::optional<GrayImage> mask1;   // aligned with the pre-aligned first image
  std::optional<GrayImage> mask2;
};

struct EstimationResult {
  std::vector<ScaleEstimate> scales;  // coarsest first
  Homography homography;              // cascaded, level-0 pixels
  int fallbacks = 0;                  // degenerate outputs replaced by identity
};

// (moving, reference): the estimate H satisfies warp(moving, H) ~ reference.
struct PairView {
  const GrayImage* moving = nullptr;
  const GrayImage* reference = nullptr;
};

struct ScaleStep {
  int level = 0;
  nn::Graph<float>& graph;
  const BaseNet::Output& output;
  std::span<const Homography> pre_alignment;
};

// Called once per scale after the forward pass; training code computes the
// loss there and calls graph.backward().
using ScaleHook = std::function<void(ScaleStep&)>;

class Mhn {
 public:
  Mhn(const MhnConfig& cfg, std::uint64_t seed);

  const MhnConfig& config() const { return cfg_; }
  int n_scales() const { return cfg_.n_scales; }
  BaseNet& net(int k) { return nets_[k]; }
  const BaseNet& net(int k) const { return nets_[k]; }

  std::vector<EstimationResult> forward_batch(std::span<const PairView> pairs, Mode mode, Rng& rng,
                                              const ScaleHook& hook = {});
  EstimationResult estimate(const GrayImage& moving, const GrayImage& reference);

  std::vector<nn::Parameter<float>*> parameters();
  void zero_final_layers();

  // Named tensors (weights, BN statistics, Adam state) for checkpoints.
  void save_tensors(std::vector<nn::NamedTensor>& out) const;
  void load_tensors(const nn::Checkpoint& ckpt);

 private:
  MhnConfig cfg_;
  std::vector<BaseNet> nets_;  // index = pyramid level
};

// Clamped logit used for residual mask combination.
float mask_logit(float p);

// 2x bilinear upsampling with the same taps as the network op.
GrayImage upsample2x(const GrayImage& img);

}  // namespace hmgdyn::models

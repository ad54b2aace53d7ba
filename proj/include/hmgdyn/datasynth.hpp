#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmgdyn/geometry.hpp"
#include "hmgdyn/imaging.hpp"

namespace hmgdyn::datasynth {

using imaging::GrayImage;

// Per-pixel dynamics labels: binary for ground truth, [0,1] for predictions.
using DynamicsMask = GrayImage;

struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField() = default;
  FlowField(int w, int h) : width(w), height(h), u(static_cast<size_t>(w) * h), v(static_cast<size_t>(w) * h) {}
  double magnitude(size_t i) const;
};

// One block-matching result at a block center.
struct BlockMatch {
  geometry::Point2 center;
  double u = 0.0;
  double v = 0.0;
  double cost = 0.0;  // mean absolute difference at the chosen offset
};

// ---------------------------------------------------------------------------
// Motion analysis

// Exhaustive SAD search per block within +-radius. Ties resolve toward the
// smallest displacement magnitude, then lexicographically on (u, v).
std::vector<BlockMatch> block_matching_grid(const GrayImage& a, const GrayImage& b, int block, int radius);
FlowField block_matching_flow(const GrayImage& a, const GrayImage& b, int block, int radius);

double moving_area_ratio(const FlowField& flow);
DynamicsMask mask_from_flow(const FlowField& flow);

// ---------------------------------------------------------------------------
// Static clip detection

struct BoundaryStats {
  int unchanged_blocks = 0;  // out of 32
  bool is_static = false;
};

inline constexpr int kBoundaryFrameSize = 256;

BoundaryStats boundary_compare(const GrayImage& a, const GrayImage& b);
bool boundary_static(const GrayImage& a, const GrayImage& b);

struct StaticClipConfig {
  int min_length = 10;
  int flow_skip = 7;
  double max_moving_ratio = 0.65;
  int flow_block = 8;
  int flow_radius = 8;
};

struct PairStat {
  int frame = 0;                     // index of the later frame
  int unchanged_vs_previous = 0;     // boundary blocks unchanged vs frame-1
  int unchanged_vs_first = 0;        // ... vs the clip's first frame
  double moving_ratio = -1.0;        // vs frame-flow_skip; -1 when not computed
};

struct ClipManifest {
  int id = 0;
  int first = 0;  // inclusive frame indices into the input sequence
  int last = 0;
  bool is_static = true;
  std::vector<std::string> frame_files;
  std::vector<PairStat> stats;

  int length() const { return last - first + 1; }
};

// Greedy scan; frames must already be 256x256.
std::vector<ClipManifest> extract_static_clips(const std::vector<GrayImage>& frames, const StaticClipConfig& cfg = {});

// ---------------------------------------------------------------------------
// Procedural dynamic scenes

struct SceneConfig {
  int frame_size = 256;
  int length = 20;
  int octaves = 5;
  int sprite_count = 0;        // 0-4
  double sprite_area = 0.0;    // total fraction of the frame, 0-0.6
  double sprite_velocity = 0;  // px per frame, 0-25
  double pan_dx = 0.0;         // camera pan per frame (px) once panning starts
  double pan_dy = 0.0;
  int pan_start = 0;           // frames t > pan_start are offset by (t - pan_start) * pan

  void validate() const;
};

struct Sprite {
  int w = 0;
  int h = 0;
  double x0 = 0, y0 = 0;  // position at t = 0
  double vx = 0, vy = 0;
  std::uint64_t texture_seed = 0;
  float tone = 0.5f;
};

// A procedurally textured static background with opaque rectangular
// sprites bouncing inside the frame. Rendering frame t is deterministic.
class Scene {
 public:
  Scene(std::uint64_t seed, const SceneConfig& cfg);

  const SceneConfig& config() const { return cfg_; }
  const std::vector<Sprite>& sprites() const { return sprites_; }

  // Frame t and the exact sprite support (1 = sprite pixel).
  void render(int t, GrayImage& frame, DynamicsMask& mask) const;
  geometry::Point2 camera_offset(int t) const;
  geometry::Point2 sprite_position(const Sprite& s, int t) const;

 private:
  float background(double x, double y) const;

  SceneConfig cfg_;
  std::uint64_t seed_;
  std::vector<Sprite> sprites_;
  GrayImage cached_background_;
};

struct SynthClip {
  std::vector<GrayImage> frames;
  std::vector<DynamicsMask> masks;
};

SynthClip synth_dynamic_clip(std::uint64_t seed, const SceneConfig& cfg);

// ---------------------------------------------------------------------------
// Training pairs

struct TrainingSample {
  GrayImage patch_a;  // crop of frame j (reference)
  GrayImage patch_b;  // crop of frame k after warping by H^-1 (moving)
  geometry::CornerDisplacement gt_displacement;
  DynamicsMask mask_a;
  DynamicsMask mask_b;
  double dynamic_area_ratio = 0.0;
  int crop_x = 0;
  int crop_y = 0;

  geometry::Homography gt_homography() const;
  geometry::PatchFrame frame() const { return geometry::PatchFrame::square(patch_a.width); }
};

struct PairConfig {
  int patch_size = 128;
  double perturb_range = 32.0;
  int max_retries = 16;
};

// patch_b(p) = frame_k(H p) in patch-local coordinates, so warp(patch_b, H)
// re-aligns the static content with patch_a.
TrainingSample generate_pair(const GrayImage& frame_j, const GrayImage& frame_k, const DynamicsMask& gt_mask_j,
                             const DynamicsMask& gt_mask_k, std::uint64_t rng_seed, const PairConfig& cfg);

}  // namespace hmgdyn::datasynth

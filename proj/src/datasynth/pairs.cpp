#include <cmath>
#include <string>

#include "hmgdyn/datasynth.hpp"
#include "hmgdyn/error.hpp"
#include "hmgdyn/rng.hpp"

namespace hmgdyn::datasynth {

using geometry::CornerDisplacement;
using geometry::Homography;

geometry::Homography TrainingSample::gt_homography() const {
  return geometry::displacement_to_homography(gt_displacement, frame());
}

TrainingSample generate_pair(const GrayImage& frame_j, const GrayImage& frame_k, const DynamicsMask& gt_mask_j,
                             const DynamicsMask& gt_mask_k, std::uint64_t rng_seed, const PairConfig& cfg) {
  if (!frame_j.same_size(frame_k) || !frame_j.same_size(gt_mask_j) || !frame_j.same_size(gt_mask_k)) {
    throw Error(ErrorKind::SizeMismatch, "pair frames and masks must share dimensions");
  }
  if (cfg.patch_size < 2 || !(cfg.perturb_range >= 0.0)) {
    throw Error(ErrorKind::ConfigInvalid, "invalid patch size or perturbation range");
  }
  const int margin = static_cast<int>(std::ceil(cfg.perturb_range));
  const int max_x = frame_j.width - cfg.patch_size - margin;
  const int max_y = frame_j.height - cfg.patch_size - margin;
  if (max_x < margin || max_y < margin) {
    throw Error(ErrorKind::OutOfBounds, "frame " + std::to_string(frame_j.width) + "x" + std::to_string(frame_j.height) +
                                            " too small for patch " + std::to_string(cfg.patch_size) + " with margin " +
                                            std::to_string(margin));
  }

  Rng rng(rng_seed);
  TrainingSample s;
  s.crop_x = static_cast<int>(rng.uniform_int(margin, max_x));
  s.crop_y = static_cast<int>(rng.uniform_int(margin, max_y));
  const auto patch = geometry::PatchFrame::square(cfg.patch_size);

  Homography h;
  bool solved = false;
  for (int attempt = 0; attempt <= cfg.max_retries && !solved; ++attempt) {
    for (double& v : s.gt_displacement.d) v = rng.uniform(-cfg.perturb_range, cfg.perturb_range);
    try {
      h = geometry::displacement_to_homography(s.gt_displacement, patch);
      solved = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateCorners) throw;
    }
  }
  if (!solved) throw Error(ErrorKind::DegenerateCorners, "no valid perturbation after retries");

  // patch_b(p) = frame_k(T(crop) H p); warp() samples at the inverse of its
  // argument, so pass the inverse of that chain.
  const Homography sample_map = Homography::translation(s.crop_x, s.crop_y) * h;
  const Homography pull = geometry::invert(sample_map);
  s.patch_a = imaging::crop_patch(frame_j, s.crop_x, s.crop_y, cfg.patch_size);
  s.patch_b = imaging::warp(frame_k, pull, cfg.patch_size, cfg.patch_size);
  s.mask_a = imaging::crop_patch(gt_mask_j, s.crop_x, s.crop_y, cfg.patch_size);
  s.mask_b = imaging::warp(gt_mask_k, pull, cfg.patch_size, cfg.patch_size);
  for (float& v : s.mask_b.data) v = v >= 0.5f ? 1.0f : 0.0f;
  s.dynamic_area_ratio = s.mask_a.mean();
  return s;
}

}  // namespace hmgdyn::datasynth

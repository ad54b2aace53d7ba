#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hmgdyn/datasynth.hpp"

namespace hmgdyn::datasynth {

// Ranges the per-clip scene parameters are drawn from.
struct DatasetRecipe {
  std::string preset = "desk";
  std::uint64_t seed = 1;
  int num_samples = 100;
  int pairs_per_clip = 4;
  int max_frame_gap = 5;  // |j - k| <= max_frame_gap
  int frame_size = 96;
  int clip_length = 12;
  int octaves = 4;
  int sprite_count_min = 0;
  int sprite_count_max = 0;
  // Total sprite area as a fraction of the training patch, not the frame.
  double sprite_area_min = 0.0;
  double sprite_area_max = 0.0;
  double velocity_min = 0.0;
  double velocity_max = 0.0;
  PairConfig pair{64, 8.0, 16};

  void validate() const;
  bool is_static() const { return sprite_count_max == 0; }

  // 64x64 patches, range 8, frames 96x96.
  static DatasetRecipe desk_static();
  // Desk preset with 1-2 sprites covering 10-40% of the frame.
  static DatasetRecipe desk_dynamic();
  // 128x128 patches, range 32, frames 256x256.
  static DatasetRecipe full_static();
  static DatasetRecipe full_dynamic();
};

struct Dataset {
  DatasetRecipe recipe;
  std::vector<TrainingSample> samples;
};

// Clip c is rendered from mix_seed(recipe.seed, c); the result does not
// depend on how clips are scheduled.
Dataset build_dataset(const DatasetRecipe& recipe);

// Directory container: manifest.json plus samples/<id>/{patch_a,patch_b,
// mask_a,mask_b}.png and gt.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

std::string recipe_to_json(const DatasetRecipe& r);
DatasetRecipe recipe_from_json(const std::string& text);

}  // namespace hmgdyn::datasynth

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "hmgdyn/dataset.hpp"
#include "hmgdyn/error.hpp"
#include "oracles.hpp"

using namespace hmgdyn;
using namespace hmgdyn::datasynth;
using geometry::Homography;

namespace {

SceneConfig scene(int size, int length, int sprites = 0, double area = 0.0, double velocity = 0.0) {
  SceneConfig c;
  c.frame_size = size;
  c.length = length;
  c.octaves = 4;
  c.sprite_count = sprites;
  c.sprite_area = area;
  c.sprite_velocity = velocity;
  return c;
}

double interior_fraction(const FlowField& f, double u, double v, int border) {
  int hit = 0, n = 0;
  for (int y = border; y < f.height - border; ++y) {
    for (int x = border; x < f.width - border; ++x) {
      const size_t i = static_cast<size_t>(y) * f.width + x;
      ++n;
      if (std::abs(f.u[i] - u) < 0.5 && std::abs(f.v[i] - v) < 0.5) ++hit;
    }
  }
  return static_cast<double>(hit) / n;
}

}  // namespace

TEST(BoundaryStatic, IdenticalAndShifted) {
  const GrayImage a = oracle::texture(256, 256, 1);
  EXPECT_TRUE(boundary_static(a, a));
  EXPECT_EQ(boundary_compare(a, a).unchanged_blocks, 32);
  EXPECT_FALSE(boundary_static(a, oracle::shifted(a, 4, 0)));
  EXPECT_THROW(boundary_static(GrayImage(128, 128), GrayImage(128, 128)), Error);
}

TEST(BoundaryStatic, CentralSpriteKeepsBorderStatic) {
  const GrayImage a = oracle::texture(256, 256, 2);
  GrayImage b = a;
  for (int y = 100; y < 150; ++y)
    for (int x = 90; x < 160; ++x) b.at(x, y) = 1.0f - b.at(x, y);
  EXPECT_TRUE(boundary_static(a, b));
}

TEST(BlockMatchingFlow, IdenticalFramesZeroFlow) {
  const GrayImage a = oracle::texture(64, 64, 3);
  const FlowField f = block_matching_flow(a, a, 8, 4);
  for (size_t i = 0; i < f.u.size(); ++i) {
    ASSERT_EQ(f.u[i], 0.0f);
    ASSERT_EQ(f.v[i], 0.0f);
  }
  EXPECT_THROW(block_matching_flow(a, GrayImage(32, 64), 8, 4), Error);
}

TEST(BlockMatchingFlow, RecoversShift) {
  const GrayImage a = oracle::texture(96, 96, 4);
  const FlowField f = block_matching_flow(a, oracle::shifted(a, 3, 0), 8, 6);
  EXPECT_GE(interior_fraction(f, 3, 0, 8), 0.9);
}

TEST(BlockMatchingFlow, SpriteMotionIsLocal) {
  const GrayImage bg = oracle::texture(96, 96, 5);
  const GrayImage sprite = oracle::texture(20, 20, 6);
  GrayImage a = bg, b = bg;
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) {
      a.at(30 + x, 30 + y) = sprite.at(x, y);
      b.at(36 + x, 36 + y) = sprite.at(x, y);
    }
  }
  const FlowField f = block_matching_flow(a, b, 8, 8);
  for (int y = 0; y < 96; ++y) {
    for (int x = 0; x < 96; ++x) {
      const bool near = x >= 20 && x < 66 && y >= 20 && y < 66;
      if (!near) ASSERT_LE(f.magnitude(static_cast<size_t>(y) * 96 + x), 1.0) << x << "," << y;
    }
  }
  EXPECT_GT(f.magnitude(40 * 96 + 40), 1.0);
}

TEST(MovingAreaRatio, Cases) {
  FlowField zero(10, 10);
  EXPECT_EQ(moving_area_ratio(zero), 0.0);
  FlowField all(10, 10);
  std::fill(all.u.begin(), all.u.end(), 2.0f);
  EXPECT_EQ(moving_area_ratio(all), 1.0);
}

TEST(MovingAreaRatio, SpriteScene) {
  SceneConfig c = scene(128, 10, 1, 0.2, 5.0);
  c.octaves = 5;
  const SynthClip clip = synth_dynamic_clip(21, c);
  const FlowField f = block_matching_flow(clip.frames[0], clip.frames[1], 8, 8);
  // Between the sprite itself and its swept box grown by one block on each side.
  const Scene sc(21, c);
  const auto& sp = sc.sprites()[0];
  const double lo = static_cast<double>(sp.w * sp.h) / (128.0 * 128.0);
  const double hi = (sp.w + 5.0 + 16.0) * (sp.h + 5.0 + 16.0) / (128.0 * 128.0);
  const double r = moving_area_ratio(f);
  EXPECT_GT(r, lo - 0.02);
  EXPECT_LT(r, hi);
}

TEST(MaskFromFlow, Threshold) {
  FlowField f(6, 6);
  for (float v : mask_from_flow(f).data) EXPECT_EQ(v, 0.0f);
  std::fill(f.u.begin(), f.u.end(), 0.5f);
  std::fill(f.v.begin(), f.v.end(), 0.5f);
  for (float v : mask_from_flow(f).data) EXPECT_EQ(v, 0.0f);
  f.u[7] = 6;
  f.v[7] = 6;
  const auto m = mask_from_flow(f);
  EXPECT_EQ(m.data[7], 1.0f);
  EXPECT_EQ(m.mean(), 1.0 / 36);
}

TEST(MaskFromFlow, SpriteSupport) {
  const GrayImage bg = oracle::texture(64, 64, 7);
  const GrayImage sprite = oracle::texture(16, 16, 8);
  GrayImage a = bg, b = bg;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      a.at(16 + x, 16 + y) = sprite.at(x, y);
      b.at(22 + x, 22 + y) = sprite.at(x, y);
    }
  }
  const auto m = mask_from_flow(block_matching_flow(a, b, 8, 8));
  // Blocks fully inside the sprite move by (6, 6); far background does not.
  EXPECT_EQ(m.at(20, 20), 1.0f);
  EXPECT_EQ(m.at(60, 4), 0.0f);
  EXPECT_EQ(m.at(4, 60), 0.0f);
}

TEST(SynthDynamicClip, Contracts) {
  const SynthClip still = synth_dynamic_clip(1, scene(64, 10));
  for (size_t t = 1; t < still.frames.size(); ++t) EXPECT_EQ(still.frames[t].data, still.frames[0].data);
  for (const auto& m : still.masks) EXPECT_EQ(m.mean(), 0.0);

  const SynthClip a = synth_dynamic_clip(9, scene(128, 10, 1, 0.2, 5));
  const SynthClip b = synth_dynamic_clip(9, scene(128, 10, 1, 0.2, 5));
  for (size_t t = 0; t < a.frames.size(); ++t) {
    EXPECT_EQ(a.frames[t].data, b.frames[t].data);
    EXPECT_NEAR(a.masks[t].mean(), 0.2, 0.02);
    for (float v : a.masks[t].data) ASSERT_TRUE(v == 0.0f || v == 1.0f);
  }
  EXPECT_THROW(synth_dynamic_clip(1, scene(64, 5)), Error);
  EXPECT_THROW(synth_dynamic_clip(1, scene(64, 10, 5, 0.1, 1)), Error);
  EXPECT_THROW(synth_dynamic_clip(1, scene(64, 10, 1, 0.7, 1)), Error);
}

TEST(ExtractStaticClips, IdenticalFramesOneClip) {
  const GrayImage f = oracle::texture(256, 256, 10);
  const auto clips = extract_static_clips(std::vector<GrayImage>(20, f));
  ASSERT_EQ(clips.size(), 1u);
  EXPECT_EQ(clips[0].first, 0);
  EXPECT_EQ(clips[0].length(), 20);
}

TEST(ExtractStaticClips, PanAtFrameTenEmitsNothing) {
  // Frames 1..9 (one-based) static, the tenth onward pans 4 px per frame.
  SceneConfig c = scene(256, 20);
  c.pan_dx = 4;
  c.pan_start = 8;
  const auto clip = synth_dynamic_clip(3, c);
  EXPECT_TRUE(extract_static_clips(clip.frames).empty());
}

TEST(ExtractStaticClips, SpriteSceneIsOneClip) {
  const auto clip = synth_dynamic_clip(4, scene(256, 15, 1, 0.05, 2));
  const auto clips = extract_static_clips(clip.frames);
  ASSERT_EQ(clips.size(), 1u);
  EXPECT_EQ(clips[0].length(), 15);
}

TEST(ExtractStaticClips, BoundariesAtMotionEvents) {
  // 12 static frames, then a 4 px pan for 6 frames, then 12 static frames.
  const GrayImage base = oracle::texture(256, 256, 11);
  std::vector<GrayImage> frames(12, base);
  for (int i = 1; i <= 6; ++i) frames.push_back(oracle::shifted(base, 4 * i, 0));
  for (int i = 0; i < 12; ++i) frames.push_back(oracle::shifted(base, 24, 0));
  const auto clips = extract_static_clips(frames);
  ASSERT_EQ(clips.size(), 2u);
  EXPECT_EQ(clips[0].first, 0);
  EXPECT_EQ(clips[0].last, 11);
  EXPECT_EQ(clips[1].first, 17);  // the last pan frame already matches what follows
  EXPECT_EQ(clips[1].last, 29);
}

TEST(GeneratePair, ZeroPerturbationSameFrame) {
  const auto clip = synth_dynamic_clip(5, scene(96, 10));
  const TrainingSample s = generate_pair(clip.frames[0], clip.frames[0], clip.masks[0], clip.masks[0], 1, {64, 0.0, 4});
  EXPECT_EQ(s.patch_a.data, s.patch_b.data);
  EXPECT_EQ(geometry::mean_corner_error(Homography::identity(), s.gt_homography(), s.frame()), 0.0);
}

TEST(GeneratePair, GroundTruthRealigns) {
  const auto clip = synth_dynamic_clip(6, scene(96, 10));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TrainingSample s = generate_pair(clip.frames[0], clip.frames[3], clip.masks[0], clip.masks[3], seed, {64, 8.0, 16});
    for (double v : s.gt_displacement.d) {
      EXPECT_LE(std::abs(v), 8.0);
    }
    const auto back = geometry::homography_to_displacement(s.gt_homography(), s.frame());
    for (int k = 0; k < 8; ++k) EXPECT_NEAR(back.d[k], s.gt_displacement.d[k], 1e-7);
    const GrayImage aligned = imaging::warp(s.patch_b, s.gt_homography());
    const GrayImage valid = imaging::warp(GrayImage(64, 64, 1.0f), s.gt_homography());
    double err = 0.0;
    int n = 0;
    for (int y = 2; y < 62; ++y) {
      for (int x = 2; x < 62; ++x) {
        if (valid.at(x, y) < 0.999f) continue;
        err += std::abs(aligned.at(x, y) - s.patch_a.at(x, y));
        ++n;
      }
    }
    EXPECT_LT(err / n, 0.02);
    EXPECT_EQ(s.dynamic_area_ratio, s.mask_a.mean());
  }
}

TEST(GeneratePair, SpriteAreaRatio) {
  // One sprite covering 25% of a 128 px patch inside a 192 px frame.
  SceneConfig c = scene(192, 10, 1, 0.25 * (128.0 * 128.0) / (192.0 * 192.0), 0.0);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 40 && checked < 3; ++seed) {
    const Scene sc(seed, c);
    const auto& sp = sc.sprites()[0];
    const auto p = sc.sprite_position(sp, 0);
    const auto clip = synth_dynamic_clip(seed, c);
    const GrayImage& m = clip.masks[0];
    int hits = 0;
    for (float v : m.data) hits += v > 0.5f;
    ASSERT_NEAR(static_cast<double>(hits) / (128.0 * 128.0), 0.25, 0.02);
    // Only crops that contain the whole sprite have a known answer.
    for (std::uint64_t k = 0; k < 30; ++k) {
      const TrainingSample s = generate_pair(clip.frames[0], clip.frames[0], m, m, k, {128, 8.0, 16});
      if (p.x >= s.crop_x && p.y >= s.crop_y && p.x + sp.w <= s.crop_x + 128 && p.y + sp.h <= s.crop_y + 128) {
        EXPECT_NEAR(s.dynamic_area_ratio, 0.25, 0.05);
        ++checked;
        break;
      }
    }
  }
  EXPECT_EQ(checked, 3);
}

TEST(GeneratePair, Errors) {
  const GrayImage f(96, 96);
  EXPECT_THROW(generate_pair(f, GrayImage(64, 64), f, f, 1, {64, 8, 4}), Error);
  EXPECT_THROW(generate_pair(f, f, f, f, 1, {96, 8, 4}), Error);
}

TEST(Dataset, DeterministicAndRoundTrips) {
  DatasetRecipe r = DatasetRecipe::desk_dynamic();
  r.num_samples = 12;
  r.seed = 4;
  const Dataset a = build_dataset(r);
  const Dataset b = build_dataset(r);
  ASSERT_EQ(a.samples.size(), 12u);
  for (size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].patch_b.data, b.samples[i].patch_b.data);
    EXPECT_EQ(a.samples[i].gt_displacement.d, b.samples[i].gt_displacement.d);
  }
  const auto dir = std::filesystem::temp_directory_path() / "hmgdyn_test_dataset";
  std::filesystem::remove_all(dir);
  write_dataset(dir, a);
  const Dataset c = read_dataset(dir);
  ASSERT_EQ(c.samples.size(), a.samples.size());
  EXPECT_EQ(c.recipe.seed, 4u);
  for (size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(c.samples[i].gt_displacement.d, a.samples[i].gt_displacement.d);
    EXPECT_EQ(c.samples[i].mask_a.data, a.samples[i].mask_a.data);
    EXPECT_EQ(c.samples[i].dynamic_area_ratio, c.samples[i].mask_a.mean());
    for (size_t p = 0; p < a.samples[i].patch_a.data.size(); ++p)
      ASSERT_NEAR(c.samples[i].patch_a.data[p], a.samples[i].patch_a.data[p], 0.5 / 255 + 1e-6);
  }
  EXPECT_THROW(read_dataset(dir / "nope"), Error);
}

TEST(Dataset, StaticPresetHasNoDynamics) {
  DatasetRecipe r = DatasetRecipe::desk_static();
  r.num_samples = 20;
  for (const auto& s : build_dataset(r).samples) EXPECT_EQ(s.dynamic_area_ratio, 0.0);
}

TEST(Dataset, RecipeValidation) {
  DatasetRecipe r;
  r.clip_length = 5;
  EXPECT_THROW(build_dataset(r), Error);
  r = DatasetRecipe{};
  r.max_frame_gap = 6;
  EXPECT_THROW(build_dataset(r), Error);
  const DatasetRecipe back = recipe_from_json(recipe_to_json(DatasetRecipe::full_dynamic()));
  EXPECT_EQ(back.sprite_count_max, 4);
  EXPECT_EQ(back.pair.patch_size, 128);
}

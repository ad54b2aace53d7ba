#include <algorithm>
#include <cmath>
#include <numbers>

#include "hmgdyn/datasynth.hpp"
#include "hmgdyn/error.hpp"
#include "hmgdyn/rng.hpp"

namespace hmgdyn::datasynth {

namespace {

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h = mix_seed(mix_seed(seed, static_cast<std::uint64_t>(ix)), static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = fade(x - fx);
  const double ty = fade(y - fy);
  const double a = lattice(seed, ix, iy);
  const double b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1);
  const double d = lattice(seed, ix + 1, iy + 1);
  return (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
}

// Multi-octave noise in [0, 1] with stretched contrast.
double fractal(std::uint64_t seed, double x, double y, double base_cell, int octaves) {
  double sum = 0.0, norm = 0.0, amp = 1.0, cell = base_cell;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * value_noise(mix_seed(seed, 1000 + o), x / cell, y / cell);
    norm += amp;
    amp *= 0.7;
    cell = std::max(cell * 0.5, 1.5);
  }
  return std::clamp(0.5 + 2.2 * (sum / norm - 0.5), 0.02, 0.98);
}

double triangle_wave(double p, double span) {
  if (span <= 0.0) return 0.0;
  double r = std::fmod(p, 2.0 * span);
  if (r < 0.0) r += 2.0 * span;
  return r > span ? 2.0 * span - r : r;
}

}  // namespace

void SceneConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::ConfigInvalid, "scene: " + m); };
  if (frame_size < 32) fail("frame_size must be >= 32");
  if (length < 10) fail("clip length must be >= 10");
  if (octaves < 1 || octaves > 8) fail("octaves must be in [1, 8]");
  if (sprite_count < 0 || sprite_count > 4) fail("sprite_count must be in [0, 4]");
  if (!(sprite_area >= 0.0 && sprite_area <= 0.6)) fail("sprite_area must be in [0, 0.6]");
  if (!(sprite_velocity >= 0.0 && sprite_velocity <= 25.0)) fail("sprite_velocity must be in [0, 25]");
  if (sprite_count > 0 && sprite_area <= 0.0) fail("sprites need a positive sprite_area");
  if (pan_start < 0) fail("pan_start must be >= 0");
}

Scene::Scene(std::uint64_t seed, const SceneConfig& cfg) : cfg_(cfg), seed_(seed) {
  cfg_.validate();
  Rng rng(mix_seed(seed, 0xB0B));
  const double frame_area = static_cast<double>(cfg_.frame_size) * cfg_.frame_size;
  for (int i = 0; i < cfg_.sprite_count; ++i) {
    Sprite s;
    const double area = cfg_.sprite_area * frame_area / cfg_.sprite_count;
    const double aspect = rng.uniform(0.7, 1.4);
    s.w = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 2, cfg_.frame_size);
    s.h = std::clamp(static_cast<int>(std::lround(area / s.w)), 2, cfg_.frame_size);
    s.x0 = rng.uniform(0.0, cfg_.frame_size - s.w);
    s.y0 = rng.uniform(0.0, cfg_.frame_size - s.h);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.vx = cfg_.sprite_velocity * std::cos(theta);
    s.vy = cfg_.sprite_velocity * std::sin(theta);
    s.texture_seed = rng.next_u64();
    s.tone = static_cast<float>(rng.uniform(0.2, 0.8));
    sprites_.push_back(s);
  }
  if (cfg_.pan_dx == 0.0 && cfg_.pan_dy == 0.0) {
    cached_background_ = GrayImage(cfg_.frame_size, cfg_.frame_size);
    for (int y = 0; y < cfg_.frame_size; ++y) {
      for (int x = 0; x < cfg_.frame_size; ++x) cached_background_.at(x, y) = background(x, y);
    }
  }
}

float Scene::background(double x, double y) const {
  return static_cast<float>(fractal(seed_, x, y, cfg_.frame_size / 4.0, cfg_.octaves));
}

geometry::Point2 Scene::camera_offset(int t) const {
  const double steps = std::max(0, t - cfg_.pan_start);
  return {cfg_.pan_dx * steps, cfg_.pan_dy * steps};
}

geometry::Point2 Scene::sprite_position(const Sprite& s, int t) const {
  const double x = triangle_wave(s.x0 + s.vx * t, cfg_.frame_size - s.w);
  const double y = triangle_wave(s.y0 + s.vy * t, cfg_.frame_size - s.h);
  return {std::round(x), std::round(y)};
}

void Scene::render(int t, GrayImage& frame, DynamicsMask& mask) const {
  const int n = cfg_.frame_size;
  const geometry::Point2 cam = camera_offset(t);
  if (!cached_background_.data.empty()) {
    frame = cached_background_;
  } else {
    frame = GrayImage(n, n);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) frame.at(x, y) = background(x + cam.x, y + cam.y);
    }
  }
  mask = DynamicsMask(n, n, 0.0f);
  for (const Sprite& s : sprites_) {
    const geometry::Point2 p = sprite_position(s, t);
    const double cell = std::max(4.0, std::min(s.w, s.h) / 3.0);
    for (int y = 0; y < n; ++y) {
      const double ly = y + cam.y - p.y;
      if (ly < 0.0 || ly >= s.h) continue;
      for (int x = 0; x < n; ++x) {
        const double lx = x + cam.x - p.x;
        if (lx < 0.0 || lx >= s.w) continue;
        const double tex = fractal(s.texture_seed, lx, ly, cell, 3);
        frame.at(x, y) = static_cast<float>(std::clamp(s.tone + 0.5 * (tex - 0.5), 0.0, 1.0));
        mask.at(x, y) = 1.0f;
      }
    }
  }
}

SynthClip synth_dynamic_clip(std::uint64_t seed, const SceneConfig& cfg) {
  const Scene scene(seed, cfg);
  SynthClip clip;
  clip.frames.resize(cfg.length);
  clip.masks.resize(cfg.length);
  for (int t = 0; t < cfg.length; ++t) scene.render(t, clip.frames[t], clip.masks[t]);
  return clip;
}

}  // namespace hmgdyn::datasynth

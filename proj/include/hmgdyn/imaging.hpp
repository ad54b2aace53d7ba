#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hmgdyn/geometry.hpp"

namespace hmgdyn::imaging {

// Single-channel raster, row-major, values in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f);

  float& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  bool same_size(const GrayImage& o) const { return width == o.width && height == o.height; }
  double mean() const;
};

// Interleaved RGB, values in [0, 1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  RgbImage() = default;
  RgbImage(int w, int h, float fill = 0.0f);

  float& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

// Level k is downscaled by 2^k from level 0.
struct Pyramid {
  std::vector<GrayImage> levels;

  const GrayImage& operator[](size_t k) const { return levels[k]; }
  size_t size() const { return levels.size(); }
};

GrayImage to_gray(const RgbImage& img);

// Bilinear sample at pixel-center coordinates; taps outside the raster read 0.
double sample_bilinear(const GrayImage& img, double x, double y);

// Inverse warp: out(x, y) = img(invert(h)(x, y)).
GrayImage warp(const GrayImage& img, const geometry::Homography& h, int out_w, int out_h);
GrayImage warp(const GrayImage& img, const geometry::Homography& h);

GrayImage downscale_half(const GrayImage& img);
Pyramid build_pyramid(const GrayImage& img, int n_levels);
GrayImage crop_patch(const GrayImage& img, int x, int y, int size);

// Bilinear resize (pixel-center aligned), used for frame normalization.
GrayImage resize(const GrayImage& img, int out_w, int out_h);

// Red from the reference, green and blue from the warped image.
RgbImage anaglyph(const GrayImage& reference, const GrayImage& warped);

// 8-bit PNG I/O. Values map linearly to [0, 255], round-half-up on write.
// read_gray accepts gray or color files (color is converted with to_gray).
GrayImage read_gray_png(const std::filesystem::path& path);
RgbImage read_rgb_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& img);
void write_png(const std::filesystem::path& path, const RgbImage& img);

std::uint8_t to_byte(float v);

}  // namespace hmgdyn::imaging

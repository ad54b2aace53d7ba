#include "hmgdyn/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hmgdyn/error.hpp"

namespace hmgdyn::imaging {

GrayImage::GrayImage(int w, int h, float fill)
    : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

double GrayImage::mean() const {
  if (data.empty()) return 0.0;
  double s = 0.0;
  for (float v : data) s += v;
  return s / static_cast<double>(data.size());
}

RgbImage::RgbImage(int w, int h, float fill)
    : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}

GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.width, img.height);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const float* p = &img.data[3 * i];
    const double v = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    out.data[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

double sample_bilinear(const GrayImage& img, double x, double y) {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  if (fx0 < -1.0 || fy0 < -1.0 || fx0 >= img.width || fy0 >= img.height) return 0.0;
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double ax = x - fx0;
  const double ay = y - fy0;
  auto tap = [&](int xi, int yi) -> double {
    if (xi < 0 || yi < 0 || xi >= img.width || yi >= img.height) return 0.0;
    return img.at(xi, yi);
  };
  double v = 0.0;
  // Skip zero-weight taps so integer positions read exactly one pixel.
  if (ax == 0.0 && ay == 0.0) return tap(x0, y0);
  v += (1.0 - ax) * (1.0 - ay) * tap(x0, y0);
  v += ax * (1.0 - ay) * tap(x0 + 1, y0);
  v += (1.0 - ax) * ay * tap(x0, y0 + 1);
  v += ax * ay * tap(x0 + 1, y0 + 1);
  return v;
}

GrayImage warp(const GrayImage& img, const geometry::Homography& h, int out_w, int out_h) {
  const geometry::Homography inv = geometry::invert(h);
  const auto& m = inv.data();
  GrayImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const double w = m[6] * x + m[7] * y + m[8];
      if (std::abs(w) <= 1e-12) continue;
      const double sx = (m[0] * x + m[1] * y + m[2]) / w;
      const double sy = (m[3] * x + m[4] * y + m[5]) / w;
      if (!std::isfinite(sx) || !std::isfinite(sy)) continue;
      const double v = sample_bilinear(img, sx, sy);
      out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

GrayImage warp(const GrayImage& img, const geometry::Homography& h) {
  return warp(img, h, img.width, img.height);
}

GrayImage downscale_half(const GrayImage& img) {
  if (img.width < 2 || img.height < 2) {
    throw Error(ErrorKind::ImageTooSmall, "downscale_half needs at least 2x2 pixels");
  }
  const int ow = (img.width + 1) / 2;
  const int oh = (img.height + 1) / 2;
  GrayImage out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      float sum = 0.0f;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int sx = 2 * x + dx;
          const int sy = 2 * y + dy;
          if (sx < img.width && sy < img.height) {
            sum += img.at(sx, sy);
            ++n;
          }
        }
      }
      // Constant inputs stay bit-exact: n equal addends divided by n.
      out.at(x, y) = sum / static_cast<float>(n);
    }
  }
  return out;
}

Pyramid build_pyramid(const GrayImage& img, int n_levels) {
  if (n_levels < 1) throw Error(ErrorKind::ConfigInvalid, "pyramid needs at least one level");
  const int shrink = 1 << (n_levels - 1);
  const int min_w = (img.width + shrink - 1) / shrink;
  const int min_h = (img.height + shrink - 1) / shrink;
  if (n_levels > 1 && (min_w < 16 || min_h < 16)) {
    throw Error(ErrorKind::ImageTooSmall, "coarsest pyramid level would be " + std::to_string(min_w) + "x" +
                                              std::to_string(min_h) + ", below 16 px");
  }
  Pyramid p;
  p.levels.reserve(n_levels);
  p.levels.push_back(img);
  for (int k = 1; k < n_levels; ++k) p.levels.push_back(downscale_half(p.levels.back()));
  return p;
}

GrayImage crop_patch(const GrayImage& img, int x, int y, int size) {
  if (size <= 0 || x < 0 || y < 0 || x + size > img.width || y + size > img.height) {
    throw Error(ErrorKind::OutOfBounds, "crop [" + std::to_string(x) + "," + std::to_string(y) + "]+" +
                                            std::to_string(size) + " outside " + std::to_string(img.width) +
                                            "x" + std::to_string(img.height));
  }
  GrayImage out(size, size);
  for (int r = 0; r < size; ++r) {
    std::copy_n(&img.data[static_cast<size_t>(y + r) * img.width + x], size, &out.data[static_cast<size_t>(r) * size]);
  }
  return out;
}

GrayImage resize(const GrayImage& img, int out_w, int out_h) {
  if (img.width == out_w && img.height == out_h) return img;
  GrayImage out(out_w, out_h);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      out.at(x, y) = static_cast<float>(std::clamp(sample_bilinear(img, fx, fy), 0.0, 1.0));
    }
  }
  return out;
}

RgbImage anaglyph(const GrayImage& reference, const GrayImage& warped) {
  if (!reference.same_size(warped)) throw Error(ErrorKind::SizeMismatch, "anaglyph inputs differ in size");
  RgbImage out(reference.width, reference.height);
  for (size_t i = 0; i < reference.data.size(); ++i) {
    out.data[3 * i] = reference.data[i];
    out.data[3 * i + 1] = warped.data[i];
    out.data[3 * i + 2] = warped.data[i];
  }
  return out;
}

std::uint8_t to_byte(float v) {
  const double s = std::floor(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(s);
}

}  // namespace hmgdyn::imaging

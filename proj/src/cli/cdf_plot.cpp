#include <algorithm>
#include <array>
#include <cmath>

#include "hmgdyn/cli.hpp"
#include "hmgdyn/error.hpp"
#include "hmgdyn/imaging.hpp"

namespace hmgdyn::cli {

namespace {

using Color = std::array<float, 3>;

constexpr std::array<Color, 5> kPalette{{{0.85f, 0.10f, 0.10f},
                                         {0.10f, 0.35f, 0.85f},
                                         {0.10f, 0.60f, 0.20f},
                                         {0.60f, 0.20f, 0.70f},
                                         {0.90f, 0.55f, 0.05f}}};

void put(imaging::RgbImage& img, int x, int y, const Color& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = c[ch];
}

void line(imaging::RgbImage& img, double x0, double y0, double x1, double y1, const Color& c, int thick = 1) {
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    for (int dy = 0; dy < thick; ++dy) {
      for (int dx = 0; dx < thick; ++dx) put(img, x + dx, y + dy, c);
    }
  }
}

}  // namespace

void render_cdf_png(const std::filesystem::path& path, std::span<const double> thresholds,
                    std::span<const CdfCurve> curves, int width, int height) {
  if (thresholds.size() < 2) throw Error(ErrorKind::ConfigInvalid, "CDF plot needs at least two thresholds");
  if (width < 64 || height < 64) throw Error(ErrorKind::ConfigInvalid, "CDF plot too small");
  imaging::RgbImage img;
  img.width = width;
  img.height = height;
  img.data.assign(static_cast<size_t>(width) * height * 3, 1.0f);

  const int left = 40, right = width - 15, top = 15, bottom = height - 30;
  const double lo = std::log10(thresholds.front());
  const double hi = std::log10(thresholds.back());
  auto px = [&](double t) { return left + (std::log10(t) - lo) / (hi - lo) * (right - left); };
  auto py = [&](double f) { return bottom - f * (bottom - top); };

  const Color grid{0.85f, 0.85f, 0.85f}, axis{0.0f, 0.0f, 0.0f};
  for (double f = 0.25; f <= 1.0; f += 0.25) line(img, left, py(f), right, py(f), grid);
  for (double decade = std::pow(10.0, std::floor(lo)); decade <= thresholds.back(); decade *= 10.0) {
    for (int m = 1; m < 10; ++m) {
      const double t = decade * m;
      if (t < thresholds.front() || t > thresholds.back()) continue;
      line(img, px(t), top, px(t), bottom, m == 1 ? Color{0.7f, 0.7f, 0.7f} : grid);
    }
  }
  line(img, left, bottom, right, bottom, axis);
  line(img, left, top, left, bottom, axis);

  for (size_t c = 0; c < curves.size(); ++c) {
    const auto& f = curves[c].fractions;
    const Color& col = kPalette[c % kPalette.size()];
    for (size_t i = 1; i < std::min(f.size(), thresholds.size()); ++i) {
      line(img, px(thresholds[i - 1]), py(f[i - 1]), px(thresholds[i]), py(f[i]), col, 2);
    }
    // Legend swatch, one row per curve.
    line(img, right - 40, top + 8 + 10.0 * c, right - 10, top + 8 + 10.0 * c, col, 3);
  }
  imaging::write_png(path, img);
}

}  // namespace hmgdyn::cli

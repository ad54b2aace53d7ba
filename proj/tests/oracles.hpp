#pragma once

// Reference computations written independently of the library code, used to
// produce expected values for the unit and acceptance tests.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "hmgdyn/geometry.hpp"
#include "hmgdyn/imaging.hpp"
#include "hmgdyn/rng.hpp"

namespace oracle {

using M3 = Eigen::Matrix3d;

inline M3 mat(const hmgdyn::geometry::Homography& h) {
  M3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = h(r, c);
  return m;
}

inline Eigen::Vector2d map(const M3& m, double x, double y) {
  const Eigen::Vector3d p = m * Eigen::Vector3d(x, y, 1.0);
  return {p.x() / p.z(), p.y() / p.z()};
}

inline std::array<Eigen::Vector2d, 4> corners(int w, int h) {
  return {Eigen::Vector2d(0, 0), Eigen::Vector2d(w - 1, 0), Eigen::Vector2d(w - 1, h - 1), Eigen::Vector2d(0, h - 1)};
}

// Homography sending the frame corners to corners + d, via a full-pivot LU
// on the textbook 8x8 system in raw pixel coordinates.
inline M3 from_displacement(const std::array<double, 8>& d, int w, int h) {
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  const auto c = corners(w, h);
  for (int j = 0; j < 4; ++j) {
    const double x = c[j].x(), y = c[j].y();
    const double u = x + d[2 * j], v = y + d[2 * j + 1];
    a.row(2 * j) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * j + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * j) = u;
    b(2 * j + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> s = a.fullPivLu().solve(b);
  M3 m;
  m << s(0), s(1), s(2), s(3), s(4), s(5), s(6), s(7), 1.0;
  return m;
}

inline double corner_error(const M3& a, const M3& b, int w, int h) {
  double sum = 0.0;
  for (const auto& c : corners(w, h)) sum += (map(a, c.x(), c.y()) - map(b, c.x(), c.y())).norm();
  return sum / 4.0;
}

inline std::array<double, 8> random_displacement(hmgdyn::Rng& rng, double range) {
  std::array<double, 8> d;
  for (double& v : d) v = rng.uniform(-range, range);
  return d;
}

// Mild projective transform around the identity.
inline hmgdyn::geometry::Homography random_homography(hmgdyn::Rng& rng, double shift = 6.0, double persp = 2e-4) {
  return hmgdyn::geometry::Homography({1.0 + rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-shift, shift),
                                       rng.uniform(-0.05, 0.05), 1.0 + rng.uniform(-0.05, 0.05), rng.uniform(-shift, shift),
                                       rng.uniform(-persp, persp), rng.uniform(-persp, persp), 1.0});
}

// Binary cross entropy in long double, predictions clamped to [1e-7, 1-1e-7].
inline double bce(const std::vector<double>& pred, const std::vector<double>& gt) {
  long double s = 0.0L;
  for (size_t i = 0; i < pred.size(); ++i) {
    const long double p = std::clamp(pred[i], 1e-7, 1.0 - 1e-7);
    s += -gt[i] * std::log(p) - (1.0L - gt[i]) * std::log(1.0L - p);
  }
  return static_cast<double>(s / pred.size());
}

// Value-noise texture that is easy for block matching.
inline hmgdyn::imaging::GrayImage texture(int w, int h, std::uint64_t seed) {
  hmgdyn::Rng rng(seed);
  const int cell = 4;
  const int gw = w / cell + 2, gh = h / cell + 2;
  std::vector<double> grid(static_cast<size_t>(gw) * gh);
  for (double& v : grid) v = rng.uniform();
  hmgdyn::imaging::GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / cell, fy = static_cast<double>(y) / cell;
      const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
      const double tx = fx - ix, ty = fy - iy;
      const double v = (1 - tx) * (1 - ty) * grid[iy * gw + ix] + tx * (1 - ty) * grid[iy * gw + ix + 1] +
                       (1 - tx) * ty * grid[(iy + 1) * gw + ix] + tx * ty * grid[(iy + 1) * gw + ix + 1];
      img.at(x, y) = static_cast<float>(0.1 + 0.8 * v);
    }
  }
  return img;
}

// Integer shift with clamped borders: out(x, y) = img(x - dx, y - dy).
inline hmgdyn::imaging::GrayImage shifted(const hmgdyn::imaging::GrayImage& img, int dx, int dy) {
  hmgdyn::imaging::GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int sx = std::clamp(x - dx, 0, img.width - 1), sy = std::clamp(y - dy, 0, img.height - 1);
      out.at(x, y) = img.at(sx, sy);
    }
  }
  return out;
}

}  // namespace oracle

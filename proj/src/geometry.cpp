#include "hmgdyn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hmgdyn/error.hpp"

namespace hmgdyn::geometry {

namespace {

constexpr double kTiny = 1e-12;

using Mat3 = std::array<double, 9>;

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[3 * i + k] * b[3 * k + j];
      r[3 * i + j] = s;
    }
  }
  return r;
}

double det3(const Mat3& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 normalized(Mat3 m) {
  if (std::abs(m[8]) > kTiny) {
    const double s = m[8];
    for (double& v : m) v /= s;
    m[8] = 1.0;
  } else {
    double n = 0.0;
    for (double v : m) n += v * v;
    n = std::sqrt(n);
    if (n > 0.0) {
      for (double& v : m) v /= n;
    }
  }
  return m;
}

// Shift to the centroid and scale to unit max-extent. Returns the 3x3
// similarity and writes the transformed points.
Mat3 conditioning(std::span<const Point2, 4> pts, std::array<Point2, 4>& out) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= 4.0;
  cy /= 4.0;
  double extent = 0.0;
  for (const auto& p : pts) extent = std::max({extent, std::abs(p.x - cx), std::abs(p.y - cy)});
  const double s = extent > 0.0 ? 1.0 / extent : 1.0;
  for (int i = 0; i < 4; ++i) out[i] = {(pts[i].x - cx) * s, (pts[i].y - cy) * s};
  return {s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0};
}

Mat3 invert_similarity(const Mat3& t) {
  const double s = t[0];
  return {1.0 / s, 0.0, -t[2] / s, 0.0, 1.0 / s, -t[5] / s, 0.0, 0.0, 1.0};
}

}  // namespace

CornerDisplacement CornerDisplacement::uniform_shift(double du, double dv) {
  CornerDisplacement c;
  for (int j = 0; j < 4; ++j) {
    c.d[2 * j] = du;
    c.d[2 * j + 1] = dv;
  }
  return c;
}

PatchFrame::PatchFrame(int w, int h) : width(w), height(h) {
  if (w < 2 || h < 2) {
    throw Error(ErrorKind::ConfigInvalid,
                "patch frame must be at least 2x2, got " + std::to_string(w) + "x" + std::to_string(h));
  }
}

std::array<Point2, 4> PatchFrame::corners() const {
  const double r = width - 1.0;
  const double b = height - 1.0;
  return {Point2{0.0, 0.0}, Point2{r, 0.0}, Point2{r, b}, Point2{0.0, b}};
}

Homography::Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Homography::Homography(const std::array<double, 9>& m) : m_(normalized(m)) {
  for (double v : m_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::SingularMatrix, "non-finite homography entry");
  }
  if (std::abs(det3(m_)) <= kTiny) {
    throw Error(ErrorKind::SingularMatrix, "homography determinant is ~0");
  }
}

Homography Homography::translation(double tx, double ty) {
  return Homography({1, 0, tx, 0, 1, ty, 0, 0, 1});
}

Homography Homography::scaling(double sx, double sy) {
  return Homography({sx, 0, 0, 0, sy, 0, 0, 0, 1});
}

double Homography::determinant() const { return det3(m_); }

Homography scale_matrix() { return Homography::scaling(0.5, 0.5); }

Homography operator*(const Homography& a, const Homography& b) {
  return Homography(multiply(a.data(), b.data()));
}

Point2 apply(const Homography& h, Point2 p) {
  const auto& m = h.data();
  const double w = m[6] * p.x + m[7] * p.y + m[8];
  if (std::abs(w) <= kTiny) throw Error(ErrorKind::PointAtInfinity, "point maps to infinity");
  return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
}

Homography invert(const Homography& h) {
  const auto& m = h.data();
  const double det = det3(m);
  if (std::abs(det) <= kTiny) throw Error(ErrorKind::SingularMatrix, "cannot invert singular homography");
  // Adjugate; the constructor's normalization absorbs the 1/det.
  Mat3 adj{m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
           m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
           m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
  for (double& v : adj) v /= det;
  return Homography(adj);
}

Homography solve_four_point(std::span<const Point2, 4> src, std::span<const Point2, 4> dst) {
  std::array<Point2, 4> s{}, d{};
  const Mat3 ts = conditioning(src, s);
  const Mat3 td = conditioning(dst, d);

  // Rows of [A | b] for h = (h11 h12 h13 h21 h22 h23 h31 h32), h33 = 1.
  double a[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    const double x = s[i].x, y = s[i].y, u = d[i].x, v = d[i].y;
    double* r0 = a[2 * i];
    double* r1 = a[2 * i + 1];
    r0[0] = x; r0[1] = y; r0[2] = 1; r0[6] = -x * u; r0[7] = -y * u; r0[8] = u;
    r1[3] = x; r1[4] = y; r1[5] = 1; r1[6] = -x * v; r1[7] = -y * v; r1[8] = v;
  }

  for (int col = 0; col < 8; ++col) {
    int piv = col;
    for (int r = col + 1; r < 8; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) < kTiny) {
      throw Error(ErrorKind::DegenerateCorners, "four-point system is singular");
    }
    if (piv != col) std::swap(a[piv], a[col]);
    for (int r = col + 1; r < 8; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (int c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::array<double, 8> h{};
  for (int r = 7; r >= 0; --r) {
    double acc = a[r][8];
    for (int c = r + 1; c < 8; ++c) acc -= a[r][c] * h[c];
    h[r] = acc / a[r][r];
  }

  const Mat3 hn{h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0};
  const Mat3 full = multiply(invert_similarity(td), multiply(hn, ts));
  try {
    return Homography(full);
  } catch (const Error&) {
    throw Error(ErrorKind::DegenerateCorners, "four-point solve produced a singular matrix");
  }
}

Homography displacement_to_homography(const CornerDisplacement& d, const PatchFrame& f) {
  const auto src = f.corners();
  std::array<Point2, 4> dst{};
  for (int j = 0; j < 4; ++j) dst[j] = {src[j].x + d.d[2 * j], src[j].y + d.d[2 * j + 1]};
  return solve_four_point(src, dst);
}

CornerDisplacement homography_to_displacement(const Homography& h, const PatchFrame& f) {
  CornerDisplacement out;
  const auto corners = f.corners();
  for (int j = 0; j < 4; ++j) {
    const Point2 q = apply(h, corners[j]);
    out.d[2 * j] = q.x - corners[j].x;
    out.d[2 * j + 1] = q.y - corners[j].y;
  }
  return out;
}

Homography compose_across_scale(const Homography& h_fine, const Homography& h_coarse) {
  // S^-1 h S = diag(2,2,1) h diag(1/2,1/2,1), built entrywise to avoid
  // rounding from extra products.
  return h_fine * to_finer(h_coarse, 1);
}

Homography to_finer(const Homography& h, int levels) {
  const double f = std::ldexp(1.0, levels);
  const auto& m = h.data();
  return Homography({m[0], m[1], m[2] * f, m[3], m[4], m[5] * f, m[6] / f, m[7] / f, m[8]});
}

Homography to_coarser(const Homography& h, int levels) { return to_finer(h, -levels); }

double mean_corner_error(const Homography& h_est, const Homography& h_gt, const PatchFrame& f) {
  double sum = 0.0;
  for (const Point2& c : f.corners()) {
    const Point2 a = apply(h_est, c);
    const Point2 b = apply(h_gt, c);
    sum += std::hypot(a.x - b.x, a.y - b.y);
  }
  return sum / 4.0;
}

}  // namespace hmgdyn::geometry

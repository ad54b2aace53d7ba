#pragma once

#include <array>
#include <span>

namespace hmgdyn::geometry {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Offsets (du, dv) of the four frame corners, ordered TL, TR, BR, BL.
struct CornerDisplacement {
  std::array<double, 8> d{};

  Point2 corner(int j) const { return {d[2 * j], d[2 * j + 1]}; }
  static CornerDisplacement uniform_shift(double du, double dv);
};

// Patch coordinate frame. Corners sit at pixel centers (0,0), (W-1,0),
// (W-1,H-1), (0,H-1).
struct PatchFrame {
  int width = 128;
  int height = 128;

  PatchFrame() = default;
  PatchFrame(int w, int h);
  static PatchFrame square(int size) { return PatchFrame(size, size); }

  std::array<Point2, 4> corners() const;
};

// 3x3 projective transform, row-major. Always stored normalized: h33 = 1
// when |h33| > 1e-12, otherwise unit Frobenius norm.
class Homography {
 public:
  Homography();  // identity
  // Throws SingularMatrix when |det| <= 1e-12 after normalization.
  explicit Homography(const std::array<double, 9>& m);

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);
  static Homography scaling(double sx, double sy);

  double operator()(int r, int c) const { return m_[3 * r + c]; }
  const std::array<double, 9>& data() const { return m_; }
  double determinant() const;

 private:
  std::array<double, 9> m_;
};

// S = diag(1/2, 1/2, 1): maps level-k pixel coordinates to level k+1.
Homography scale_matrix();

// Matrix product a * b, renormalized.
Homography operator*(const Homography& a, const Homography& b);

Point2 apply(const Homography& h, Point2 p);
Homography invert(const Homography& h);

// Exact 4-correspondence solve (8x8 system, partial pivoting).
Homography solve_four_point(std::span<const Point2, 4> src, std::span<const Point2, 4> dst);

Homography displacement_to_homography(const CornerDisplacement& d, const PatchFrame& f);
CornerDisplacement homography_to_displacement(const Homography& h, const PatchFrame& f);

// h_fine * S^-1 * h_coarse * S.
Homography compose_across_scale(const Homography& h_fine, const Homography& h_coarse);

// S^-k h S^k: re-expresses a level-k homography in level-0 pixel units.
Homography to_finer(const Homography& h, int levels);
// S^k h S^-k: re-expresses a level-0 homography in level-k pixel units.
Homography to_coarser(const Homography& h, int levels);

double mean_corner_error(const Homography& h_est, const Homography& h_gt, const PatchFrame& f);

}  // namespace hmgdyn::geometry

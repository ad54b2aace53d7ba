#include <algorithm>
#include <cmath>
#include <tuple>

#include <Eigen/Dense>

#include "hmgdyn/datasynth.hpp"
#include "hmgdyn/error.hpp"
#include "hmgdyn/train.hpp"

namespace hmgdyn::train {

using geometry::Point2;

namespace {

// Shift to the centroid, scale so the mean distance is sqrt(2).
Eigen::Matrix3d normalizer(std::span<const Point2> pts) {
  double cx = 0.0, cy = 0.0;
  for (const Point2& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= pts.size();
  cy /= pts.size();
  double d = 0.0;
  for (const Point2& p : pts) d += std::hypot(p.x - cx, p.y - cy);
  d /= pts.size();
  const double s = d > 1e-12 ? std::sqrt(2.0) / d : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

bool is_inlier(const Homography& h, const Point2& src, const Point2& dst, double tol) {
  try {
    const Point2 q = geometry::apply(h, src);
    return std::hypot(q.x - dst.x, q.y - dst.y) <= tol;
  } catch (const Error&) {
    return false;
  }
}

std::vector<size_t> inliers_of(const Homography& h, std::span<const Point2> src, std::span<const Point2> dst, double tol) {
  std::vector<size_t> in;
  for (size_t i = 0; i < src.size(); ++i) {
    if (is_inlier(h, src[i], dst[i], tol)) in.push_back(i);
  }
  return in;
}

}  // namespace

Homography fit_homography_lsq(std::span<const Point2> src, std::span<const Point2> dst) {
  if (src.size() != dst.size()) throw Error(ErrorKind::SizeMismatch, "correspondence lists differ in length");
  if (src.size() < 4) throw Error(ErrorKind::InsufficientCorrespondences, "need at least 4 correspondences");
  const Eigen::Matrix3d t1 = normalizer(src);
  const Eigen::Matrix3d t2 = normalizer(dst);
  Eigen::MatrixXd a(2 * src.size(), 9);
  for (size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d p = t1 * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
    const Eigen::Vector3d q = t2 * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
    a.row(2 * i) << -p.x(), -p.y(), -1, 0, 0, 0, q.x() * p.x(), q.x() * p.y(), q.x();
    a.row(2 * i + 1) << 0, 0, 0, -p.x(), -p.y(), -1, q.y() * p.x(), q.y() * p.y(), q.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d full = t2.inverse() * hn * t1;
  std::array<double, 9> m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[3 * r + c] = full(r, c);
  }
  return Homography(m);
}

Homography ransac_from_matches(std::vector<datasynth::BlockMatch> matches, int iters, double inlier_tol, Rng& rng) {
  if (iters < 1 || !(inlier_tol > 0.0)) throw Error(ErrorKind::ConfigInvalid, "ransac needs iters >= 1 and tol > 0");
  // Canonical order, so the result does not depend on how matches were listed.
  std::sort(matches.begin(), matches.end(), [](const auto& a, const auto& b) {
    return std::tie(a.center.y, a.center.x, a.u, a.v) < std::tie(b.center.y, b.center.x, b.u, b.v);
  });
  if (matches.size() < 4) {
    throw Error(ErrorKind::InsufficientCorrespondences,
                "only " + std::to_string(matches.size()) + " block correspondences");
  }
  std::vector<Point2> src, dst;
  for (const auto& m : matches) {
    src.push_back(m.center);
    dst.push_back({m.center.x + m.u, m.center.y + m.v});
  }

  const auto n = static_cast<std::int64_t>(src.size());
  Homography best;
  size_t best_count = 0;
  for (int it = 0; it < iters; ++it) {
    std::array<std::int64_t, 4> idx{};
    for (int j = 0; j < 4; ++j) {
      bool fresh;
      do {
        idx[j] = rng.uniform_int(0, n - 1);
        fresh = std::find(idx.begin(), idx.begin() + j, idx[j]) == idx.begin() + j;
      } while (!fresh);
    }
    const std::array<Point2, 4> s{src[idx[0]], src[idx[1]], src[idx[2]], src[idx[3]]};
    const std::array<Point2, 4> d{dst[idx[0]], dst[idx[1]], dst[idx[2]], dst[idx[3]]};
    Homography h;
    try {
      h = geometry::solve_four_point(s, d);
    } catch (const Error&) {
      continue;
    }
    const size_t count = inliers_of(h, src, dst, inlier_tol).size();
    if (count > best_count) {
      best_count = count;
      best = h;
    }
  }
  if (best_count < 4) return best;

  // Refit on the consensus set, then once more on the refit's own inliers.
  Homography fit = best;
  for (int round = 0; round < 2; ++round) {
    const auto in = inliers_of(fit, src, dst, inlier_tol);
    if (in.size() < 4) break;
    std::vector<Point2> s, d;
    for (size_t i : in) {
      s.push_back(src[i]);
      d.push_back(dst[i]);
    }
    try {
      fit = fit_homography_lsq(s, d);
    } catch (const Error&) {
      break;
    }
  }
  return fit;
}

Homography ransac_baseline(const GrayImage& i1, const GrayImage& i2, int iters, double inlier_tol, Rng& rng, int block,
                           int radius) {
  if (iters < 1 || !(inlier_tol > 0.0)) throw Error(ErrorKind::ConfigInvalid, "ransac needs iters >= 1 and tol > 0");
  return ransac_from_matches(datasynth::block_matching_grid(i1, i2, block, radius), iters, inlier_tol, rng);
}

}  // namespace hmgdyn::train

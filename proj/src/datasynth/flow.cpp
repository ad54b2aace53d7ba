#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "hmgdyn/datasynth.hpp"
#include "hmgdyn/error.hpp"

namespace hmgdyn::datasynth {

namespace {

struct Offset {
  int u;
  int v;
};

// Candidate offsets in tie-break order: magnitude, then u, then v.
std::vector<Offset> search_order(int radius) {
  std::vector<Offset> out;
  for (int u = -radius; u <= radius; ++u) {
    for (int v = -radius; v <= radius; ++v) out.push_back({u, v});
  }
  std::sort(out.begin(), out.end(), [](const Offset& a, const Offset& b) {
    return std::make_tuple(a.u * a.u + a.v * a.v, a.u, a.v) < std::make_tuple(b.u * b.u + b.v * b.v, b.u, b.v);
  });
  return out;
}

}  // namespace

double FlowField::magnitude(size_t i) const { return std::hypot(static_cast<double>(u[i]), static_cast<double>(v[i])); }

std::vector<BlockMatch> block_matching_grid(const GrayImage& a, const GrayImage& b, int block, int radius) {
  if (!a.same_size(b)) throw Error(ErrorKind::SizeMismatch, "block matching frames differ in size");
  if (block < 4 || radius < 1) throw Error(ErrorKind::ConfigInvalid, "block matching needs block >= 4 and radius >= 1");
  const int nbx = a.width / block;
  const int nby = a.height / block;
  const auto order = search_order(radius);
  const int min_overlap = block * block / 2;

  std::vector<BlockMatch> out;
  out.reserve(static_cast<size_t>(nbx) * nby);
  for (int by = 0; by < nby; ++by) {
    for (int bx = 0; bx < nbx; ++bx) {
      const int x0 = bx * block;
      const int y0 = by * block;
      double best = std::numeric_limits<double>::infinity();
      Offset best_off{0, 0};
      for (const Offset& o : order) {
        // Restrict to pixels whose displaced position stays inside b.
        const int xs = std::max(x0, -o.u);
        const int xe = std::min(x0 + block, b.width - o.u);
        const int ys = std::max(y0, -o.v);
        const int ye = std::min(y0 + block, b.height - o.v);
        if (xe <= xs || ye <= ys) continue;
        const int count = (xe - xs) * (ye - ys);
        if (count < min_overlap) continue;
        double sad = 0.0;
        for (int y = ys; y < ye; ++y) {
          const float* pa = &a.data[static_cast<size_t>(y) * a.width];
          const float* pb = &b.data[static_cast<size_t>(y + o.v) * b.width + o.u];
          for (int x = xs; x < xe; ++x) sad += std::abs(pa[x] - pb[x]);
        }
        const double cost = sad / count;
        if (cost < best) {
          best = cost;
          best_off = o;
        }
      }
      out.push_back({{x0 + (block - 1) / 2.0, y0 + (block - 1) / 2.0},
                     static_cast<double>(best_off.u),
                     static_cast<double>(best_off.v),
                     best});
    }
  }
  return out;
}

FlowField block_matching_flow(const GrayImage& a, const GrayImage& b, int block, int radius) {
  const auto grid = block_matching_grid(a, b, block, radius);
  FlowField flow(a.width, a.height);
  const int nbx = a.width / block;
  const int nby = a.height / block;
  if (nbx == 0 || nby == 0) return flow;
  const double c0 = (block - 1) / 2.0;
  auto cell = [&](int gx, int gy) -> const BlockMatch& { return grid[static_cast<size_t>(gy) * nbx + gx]; };
  for (int y = 0; y < a.height; ++y) {
    const double gy = std::clamp((y - c0) / block, 0.0, nby - 1.0);
    const int gy0 = static_cast<int>(std::floor(gy));
    const int gy1 = std::min(gy0 + 1, nby - 1);
    const double ay = gy - gy0;
    for (int x = 0; x < a.width; ++x) {
      const double gx = std::clamp((x - c0) / block, 0.0, nbx - 1.0);
      const int gx0 = static_cast<int>(std::floor(gx));
      const int gx1 = std::min(gx0 + 1, nbx - 1);
      const double ax = gx - gx0;
      const auto& m00 = cell(gx0, gy0);
      const auto& m10 = cell(gx1, gy0);
      const auto& m01 = cell(gx0, gy1);
      const auto& m11 = cell(gx1, gy1);
      const size_t i = static_cast<size_t>(y) * a.width + x;
      flow.u[i] = static_cast<float>((1 - ay) * ((1 - ax) * m00.u + ax * m10.u) + ay * ((1 - ax) * m01.u + ax * m11.u));
      flow.v[i] = static_cast<float>((1 - ay) * ((1 - ax) * m00.v + ax * m10.v) + ay * ((1 - ax) * m01.v + ax * m11.v));
    }
  }
  return flow;
}

double moving_area_ratio(const FlowField& flow) {
  if (flow.u.empty()) return 0.0;
  size_t moving = 0;
  for (size_t i = 0; i < flow.u.size(); ++i) {
    if (flow.magnitude(i) > 1.0) ++moving;
  }
  return static_cast<double>(moving) / static_cast<double>(flow.u.size());
}

DynamicsMask mask_from_flow(const FlowField& flow) {
  DynamicsMask mask(flow.width, flow.height);
  for (size_t i = 0; i < flow.u.size(); ++i) mask.data[i] = flow.magnitude(i) > 1.0 ? 1.0f : 0.0f;
  return mask;
}

}  // namespace hmgdyn::datasynth

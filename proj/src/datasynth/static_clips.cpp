#include <cmath>
#include <string>

#include "hmgdyn/datasynth.hpp"
#include "hmgdyn/error.hpp"

namespace hmgdyn::datasynth {

namespace {

constexpr int kBand = 5;         // boundary thickness
constexpr int kBlockLen = 32;    // block extent along the border
constexpr double kColorTol = 6.67 / 255.0;
constexpr double kPixelFrac = 0.90;  // a block is unchanged above this fraction
constexpr double kBlockFrac = 0.25;  // frames are static above this fraction

struct Rect {
  int x, y, w, h;
};

std::vector<Rect> boundary_blocks() {
  std::vector<Rect> r;
  const int n = kBoundaryFrameSize;
  for (int i = 0; i < n / kBlockLen; ++i) {
    r.push_back({i * kBlockLen, 0, kBlockLen, kBand});
    r.push_back({i * kBlockLen, n - kBand, kBlockLen, kBand});
    r.push_back({0, i * kBlockLen, kBand, kBlockLen});
    r.push_back({n - kBand, i * kBlockLen, kBand, kBlockLen});
  }
  return r;
}

}  // namespace

BoundaryStats boundary_compare(const GrayImage& a, const GrayImage& b) {
  const int n = kBoundaryFrameSize;
  if (a.width != n || a.height != n || b.width != n || b.height != n) {
    throw Error(ErrorKind::SizeMismatch, "boundary test expects 256x256 frames");
  }
  static const std::vector<Rect> blocks = boundary_blocks();
  BoundaryStats stats;
  for (const Rect& r : blocks) {
    int stable = 0;
    for (int y = r.y; y < r.y + r.h; ++y) {
      for (int x = r.x; x < r.x + r.w; ++x) {
        if (std::abs(a.at(x, y) - b.at(x, y)) <= kColorTol) ++stable;
      }
    }
    if (stable > kPixelFrac * r.w * r.h) ++stats.unchanged_blocks;
  }
  stats.is_static = stats.unchanged_blocks > kBlockFrac * static_cast<double>(blocks.size());
  return stats;
}

bool boundary_static(const GrayImage& a, const GrayImage& b) { return boundary_compare(a, b).is_static; }

std::vector<ClipManifest> extract_static_clips(const std::vector<GrayImage>& frames, const StaticClipConfig& cfg) {
  std::vector<ClipManifest> clips;
  const int n = static_cast<int>(frames.size());
  int start = 0;
  while (start < n) {
    ClipManifest clip;
    clip.first = start;
    clip.last = start;
    int next = start + 1;
    for (; next < n; ++next) {
      PairStat st;
      st.frame = next;
      const BoundaryStats prev = boundary_compare(frames[next - 1], frames[next]);
      const BoundaryStats first = boundary_compare(frames[start], frames[next]);
      st.unchanged_vs_previous = prev.unchanged_blocks;
      st.unchanged_vs_first = first.unchanged_blocks;
      bool ok = prev.is_static && first.is_static;
      if (ok && next - cfg.flow_skip >= start) {
        const FlowField flow =
            block_matching_flow(frames[next - cfg.flow_skip], frames[next], cfg.flow_block, cfg.flow_radius);
        st.moving_ratio = moving_area_ratio(flow);
        ok = st.moving_ratio <= cfg.max_moving_ratio;
      }
      if (!ok) break;
      clip.stats.push_back(st);
      clip.last = next;
    }
    if (clip.length() >= cfg.min_length) {
      clip.id = static_cast<int>(clips.size());
      clips.push_back(std::move(clip));
    }
    // Restart at the frame that broke the run.
    start = next;
  }
  return clips;
}

}  // namespace hmgdyn::datasynth

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "hmgdyn/error.hpp"
#include "hmgdyn/imaging.hpp"
#include "oracles.hpp"

using namespace hmgdyn;
using namespace hmgdyn::imaging;
using geometry::Homography;

namespace {

GrayImage ramp(int w, int h) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<float>((x + 1000 * y) / 1e6);
  return img;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hmgdyn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(ToGray, Weights) {
  RgbImage white(3, 2, 1.0f);
  for (float v : to_gray(white).data) EXPECT_FLOAT_EQ(v, 1.0f);
  RgbImage red(3, 2);
  for (int i = 0; i < 6; ++i) red.data[3 * i] = 1.0f;
  for (float v : to_gray(red).data) EXPECT_NEAR(v, 0.299, 1e-7);
  RgbImage gray(3, 2, 0.37f);
  for (float v : to_gray(gray).data) EXPECT_NEAR(v, 0.37, 1e-7);
}

TEST(Warp, IdentityIsExact) {
  const GrayImage img = oracle::texture(40, 30, 1);
  EXPECT_EQ(warp(img, Homography::identity()).data, img.data);
}

TEST(Warp, IntegerTranslationMovesPixel) {
  GrayImage img(32, 32);
  img.at(10, 10) = 1.0f;
  const GrayImage out = warp(img, Homography::translation(3, 0));
  EXPECT_EQ(out.at(13, 10), 1.0f);
  EXPECT_EQ(out.at(10, 10), 0.0f);
}

TEST(Warp, IntegerTranslationIsLossless) {
  const GrayImage img = oracle::texture(48, 48, 2);
  const GrayImage out = warp(img, Homography::translation(-4, 7));
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      const int sx = x + 4, sy = y - 7;
      const float expect = (sx < 48 && sy >= 0) ? img.at(sx, sy) : 0.0f;
      ASSERT_EQ(out.at(x, y), expect);
    }
  }
}

TEST(Warp, RoundTripWithinInterpolationLoss) {
  Rng rng(31);
  // Smooth enough that two bilinear passes stay well inside the tolerance.
  GrayImage img(96, 96);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) img.at(x, y) = static_cast<float>(0.5 + 0.3 * std::sin(x / 7.0) * std::cos(y / 9.0));
  for (int i = 0; i < 20; ++i) {
    const Homography h = oracle::random_homography(rng, 3.0, 1e-4);
    const GrayImage back = warp(warp(img, h), geometry::invert(h));
    // Interior: at least 4 px from the border and from any zero-filled sample.
    const GrayImage valid = warp(warp(GrayImage(96, 96, 1.0f), h), geometry::invert(h));
    for (int y = 4; y < 92; ++y) {
      for (int x = 4; x < 92; ++x) {
        bool inside = true;
        for (int dy = -4; dy <= 4 && inside; ++dy)
          for (int dx = -4; dx <= 4 && inside; ++dx) inside = valid.at(x + dx, y + dy) > 0.999f;
        if (inside) ASSERT_NEAR(back.at(x, y), img.at(x, y), 0.01) << x << "," << y;
      }
    }
  }
}

TEST(Warp, PreservesRange) {
  Rng rng(32);
  for (int i = 0; i < 20; ++i) {
    GrayImage img(24, 24);
    for (float& v : img.data) v = static_cast<float>(rng.bernoulli(0.5));
    const GrayImage out = warp(img, oracle::random_homography(rng, 5.0, 1e-3));
    for (float v : out.data) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
}

TEST(Warp, SingularThrows) {
  const GrayImage img(8, 8);
  // A projective matrix cannot be constructed singular, so the error surfaces
  // at construction time.
  EXPECT_THROW(warp(img, Homography({1, 1, 0, 1, 1, 0, 0, 0, 1})), Error);
}

TEST(DownscaleHalf, Analytic) {
  GrayImage c(10, 6, 0.3f);
  const GrayImage d = downscale_half(c);
  EXPECT_EQ(d.width, 5);
  EXPECT_EQ(d.height, 3);
  for (float v : d.data) EXPECT_EQ(v, 0.3f);

  GrayImage two(2, 2);
  two.data = {0, 1, 1, 0};
  EXPECT_FLOAT_EQ(downscale_half(two).data[0], 0.5f);

  EXPECT_EQ(downscale_half(GrayImage(128, 128)).width, 64);
  EXPECT_THROW(downscale_half(GrayImage(1, 4)), Error);
}

TEST(DownscaleHalf, OddTrailingColumn) {
  GrayImage img(3, 2);
  img.data = {0.0f, 0.2f, 0.9f, 0.4f, 0.6f, 0.5f};
  const GrayImage d = downscale_half(img);
  ASSERT_EQ(d.width, 2);
  EXPECT_FLOAT_EQ(d.data[0], 0.3f);
  EXPECT_FLOAT_EQ(d.data[1], 0.7f);
}

TEST(Pyramid, Sizes) {
  const Pyramid p = build_pyramid(GrayImage(128, 128), 3);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0].width, 128);
  EXPECT_EQ(p[1].width, 64);
  EXPECT_EQ(p[2].width, 32);
  const GrayImage img = oracle::texture(20, 20, 4);
  EXPECT_EQ(build_pyramid(img, 1)[0].data, img.data);
  for (const auto& l : build_pyramid(GrayImage(64, 64, 0.7f), 3).levels)
    for (float v : l.data) EXPECT_EQ(v, 0.7f);
  EXPECT_THROW(build_pyramid(GrayImage(64, 64), 4), Error);
}

TEST(CropPatch, Contracts) {
  const GrayImage img = ramp(40, 30);
  EXPECT_EQ(crop_patch(ramp(30, 30), 0, 0, 30).data, ramp(30, 30).data);
  const GrayImage c = crop_patch(img, 5, 7, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) EXPECT_EQ(c.at(x, y), img.at(x + 5, y + 7));
  EXPECT_THROW(crop_patch(img, 35, 0, 10), Error);
  // Nested crops compose.
  EXPECT_EQ(crop_patch(crop_patch(img, 3, 4, 20), 2, 5, 8).data, crop_patch(img, 5, 9, 8).data);
}

TEST(Anaglyph, Channels) {
  const GrayImage a = oracle::texture(16, 16, 5);
  const RgbImage same = anaglyph(a, a);
  for (size_t i = 0; i < a.data.size(); ++i) {
    EXPECT_EQ(same.data[3 * i], same.data[3 * i + 1]);
    EXPECT_EQ(same.data[3 * i + 1], same.data[3 * i + 2]);
  }
  const RgbImage red = anaglyph(GrayImage(4, 4, 1.0f), GrayImage(4, 4, 0.0f));
  for (size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(red.data[3 * i], 1.0f);
    EXPECT_EQ(red.data[3 * i + 1], 0.0f);
  }
  EXPECT_THROW(anaglyph(GrayImage(4, 4), GrayImage(5, 4)), Error);
}

TEST(Anaglyph, FringesAtMisalignedEdge) {
  GrayImage ref(20, 4), mov(20, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 20; ++x) {
      ref.at(x, y) = x >= 10 ? 1.0f : 0.0f;
      mov.at(x, y) = x >= 13 ? 1.0f : 0.0f;
    }
  }
  const RgbImage rgb = anaglyph(ref, mov);
  for (int x = 0; x < 20; ++x) {
    const bool fringe = rgb.at(x, 0, 0) != rgb.at(x, 0, 1);
    EXPECT_EQ(fringe, x >= 10 && x < 13) << x;
  }
}

TEST(Png, RoundTripAndRounding) {
  const auto dir = temp_dir("png");
  GrayImage img(5, 3);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i) / 14.0f;
  write_png(dir / "g.png", img);
  const GrayImage back = read_gray_png(dir / "g.png");
  ASSERT_EQ(back.width, 5);
  for (size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 0.5 / 255 + 1e-6);
  EXPECT_EQ(to_byte(0.5f / 255.0f), 1);
  EXPECT_EQ(to_byte(1.0f), 255);
  EXPECT_EQ(to_byte(-0.2f), 0);

  RgbImage rgb(2, 2);
  rgb.at(1, 1, 0) = 1.0f;
  write_png(dir / "c.png", rgb);
  const RgbImage rb = read_rgb_png(dir / "c.png");
  EXPECT_EQ(rb.at(1, 1, 0), 1.0f);
  EXPECT_NEAR(read_gray_png(dir / "c.png").at(1, 1), 0.299, 0.5 / 255);
  EXPECT_THROW(read_gray_png(dir / "missing.png"), Error);
}

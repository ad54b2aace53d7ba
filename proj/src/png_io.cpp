#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "hmgdyn/error.hpp"
#include "hmgdyn/imaging.hpp"

namespace hmgdyn::imaging {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decoded 8-bit image with 1 (gray) or 3 (rgb) channels.
struct Raw {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> bytes;
};

Raw read_raw(const std::filesystem::path& path, bool want_rgb) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error(ErrorKind::IoError, "cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::IoError, "libpng initialization failed");
  }
  Raw raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::IoError, "failed to decode " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  const bool is_gray = (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA);
  if (want_rgb && is_gray) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  const size_t stride = png_get_rowbytes(png, info);
  raw.bytes.resize(stride * raw.height);
  rows.resize(raw.height);
  for (int y = 0; y < raw.height; ++y) rows[y] = raw.bytes.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

void write_raw(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoError, "libpng initialization failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoError, "failed to encode " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t stride = static_cast<size_t>(width) * channels;
  for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(bytes.data() + y * stride);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

GrayImage read_gray_png(const std::filesystem::path& path) {
  Raw raw = read_raw(path, false);
  if (raw.channels == 3) {
    RgbImage rgb(raw.width, raw.height);
    for (size_t i = 0; i < raw.bytes.size(); ++i) rgb.data[i] = raw.bytes[i] / 255.0f;
    return to_gray(rgb);
  }
  GrayImage img(raw.width, raw.height);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = raw.bytes[i] / 255.0f;
  return img;
}

RgbImage read_rgb_png(const std::filesystem::path& path) {
  Raw raw = read_raw(path, true);
  RgbImage img(raw.width, raw.height);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = raw.bytes[i] / 255.0f;
  return img;
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  std::vector<std::uint8_t> bytes(img.data.size());
  for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(img.data[i]);
  write_raw(path, img.width, img.height, 1, bytes);
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  std::vector<std::uint8_t> bytes(img.data.size());
  for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(img.data[i]);
  write_raw(path, img.width, img.height, 3, bytes);
}

}  // namespace hmgdyn::imaging

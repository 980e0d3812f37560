#include "warpgeo/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace warpgeo {

namespace {

uint8_t quant(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return uint8_t(std::lround(x * 255.0));
}

void write_rgb8(const std::string& path, const std::vector<uint8_t>& rgb,
                int w, int h, int channels) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("png: cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw std::runtime_error("png: encode failed for " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(size_t(h), nullptr);
  for (int v = 0; v < h; ++v)
    rows[size_t(v)] = const_cast<png_bytep>(&rgb[size_t(v) * w * channels]);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// Compact inferno-style ramp; linear interpolation between anchors.
constexpr double kRamp[][3] = {
    {0.001, 0.000, 0.014}, {0.185, 0.040, 0.375}, {0.445, 0.122, 0.507},
    {0.687, 0.216, 0.476}, {0.887, 0.362, 0.330}, {0.982, 0.585, 0.154},
    {0.962, 0.842, 0.146}, {0.988, 0.998, 0.645}};
constexpr int kRampN = int(sizeof(kRamp) / sizeof(kRamp[0]));

void ramp_color(double t, uint8_t* rgb) {
  t = std::clamp(t, 0.0, 1.0) * (kRampN - 1);
  const int i = std::min(int(t), kRampN - 2);
  const double f = t - i;
  for (int c = 0; c < 3; ++c)
    rgb[c] = quant(kRamp[i][c] * (1.0 - f) + kRamp[i + 1][c] * f);
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw std::invalid_argument("png: only 1 or 3 channels supported");
  const int w = img.width(), h = img.height(), c = img.channels();
  std::vector<uint8_t> buf(size_t(w) * h * c, 0);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!img.valid_at(u, v)) continue;
      for (int k = 0; k < c; ++k)
        buf[(size_t(v) * w + u) * c + k] = quant(img.at(u, v, k));
    }
  write_rgb8(path, buf, w, h, c);
}

void write_depth_png(const std::string& path, const ScalarField& depth,
                     double lo, double hi) {
  const int w = depth.width(), h = depth.height();
  if (lo == hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u)
        if (depth.valid_at(u, v)) {
          lo = std::min(lo, depth.at(u, v));
          hi = std::max(hi, depth.at(u, v));
        }
    if (!(lo < hi)) {  // flat or empty map
      lo = 0.0;
      hi = 1.0;
    }
  }
  std::vector<uint8_t> buf(size_t(w) * h * 3, 0);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!depth.valid_at(u, v)) continue;
      ramp_color((depth.at(u, v) - lo) / (hi - lo),
                 &buf[(size_t(v) * w + u) * 3]);
    }
  write_rgb8(path, buf, w, h, 3);
}

void write_normal_png(const std::string& path, const VectorField& normals) {
  if (normals.channels() != 3)
    throw std::invalid_argument("png: normal map must have 3 channels");
  const int w = normals.width(), h = normals.height();
  std::vector<uint8_t> buf(size_t(w) * h * 3, 0);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!normals.valid_at(u, v)) continue;
      for (int c = 0; c < 3; ++c)
        buf[(size_t(v) * w + u) * 3 + c] =
            quant((normals.at(u, v, c) + 1.0) * 0.5);
    }
  write_rgb8(path, buf, w, h, 3);
}

std::vector<uint8_t> read_png_rgb8(const std::string& path, int* width,
                                   int* height) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("png: cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png: decode failed for " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  std::vector<uint8_t> out(size_t(w) * h * 3);
  std::vector<png_bytep> rows(size_t(h), nullptr);
  for (int v = 0; v < h; ++v) rows[size_t(v)] = &out[size_t(v) * w * 3];
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  *width = w;
  *height = h;
  return out;
}

}  // namespace warpgeo

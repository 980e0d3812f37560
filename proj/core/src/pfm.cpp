#include "warpgeo/pfm.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace warpgeo {

namespace {

constexpr bool host_little_endian() {
  return std::endian::native == std::endian::little;
}

float swap_float(float f) {
  uint32_t u;
  std::memcpy(&u, &f, 4);
  u = __builtin_bswap32(u);
  std::memcpy(&f, &u, 4);
  return f;
}

// Reads one whitespace-delimited header token, skipping leading whitespace.
std::string next_token(std::istream& in) {
  std::string tok;
  in >> tok;
  return tok;
}

Image read_pfm_impl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pfm: cannot open " + path);
  const std::string magic = next_token(in);
  int channels;
  if (magic == "Pf")
    channels = 1;
  else if (magic == "PF")
    channels = 3;
  else
    throw std::runtime_error("pfm: bad magic in " + path);
  int w = 0, h = 0;
  double scale = 0.0;
  in >> w >> h >> scale;
  if (!in || w <= 0 || h <= 0 || scale == 0.0)
    throw std::runtime_error("pfm: bad header in " + path);
  in.get();  // single whitespace byte before the raster
  const bool file_little = scale < 0.0;

  Image img(w, h, channels);
  std::vector<float> row(size_t(w) * channels);
  for (int v = h - 1; v >= 0; --v) {  // scanlines are bottom-up
    in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * 4));
    if (!in) throw std::runtime_error("pfm: truncated raster in " + path);
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < channels; ++c) {
        float f = row[size_t(u) * channels + c];
        if (file_little != host_little_endian()) f = swap_float(f);
        img.at(u, v, c) = double(f);
      }
  }
  return img;
}

void write_pfm_impl(const std::string& path, const double* data, int w, int h,
                    int channels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pfm: cannot write " + path);
  out << (channels == 1 ? "Pf" : "PF") << "\n" << w << " " << h << "\n-1.0\n";
  std::vector<float> row(size_t(w) * channels);
  for (int v = h - 1; v >= 0; --v) {
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < channels; ++c) {
        float f = float(data[(size_t(v) * w + u) * channels + c]);
        if (!host_little_endian()) f = swap_float(f);
        row[size_t(u) * channels + c] = f;
      }
    out.write(reinterpret_cast<const char*>(row.data()),
              std::streamsize(row.size() * 4));
  }
  if (!out) throw std::runtime_error("pfm: short write to " + path);
}

}  // namespace

Image read_pfm(const std::string& path) { return read_pfm_impl(path); }

ScalarField read_pfm_scalar(const std::string& path) {
  Image img = read_pfm_impl(path);
  if (img.channels() != 1)
    throw std::runtime_error("pfm: expected 1 channel in " + path);
  ScalarField f(img.width(), img.height());
  std::memcpy(f.data(), img.data(), img.size() * sizeof(double));
  return f;
}

void write_pfm(const std::string& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw std::invalid_argument("pfm: only 1 or 3 channels supported");
  write_pfm_impl(path, img.data(), img.width(), img.height(), img.channels());
}

void write_pfm(const std::string& path, const ScalarField& f) {
  write_pfm_impl(path, f.data(), f.width(), f.height(), 1);
}

}  // namespace warpgeo

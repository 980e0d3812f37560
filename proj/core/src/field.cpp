#include "warpgeo/field.hpp"

#include <algorithm>

namespace warpgeo {

ScalarField grayscale(const Image& img) {
  ScalarField out(img.width(), img.height());
  const int c = img.channels();
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      double s = 0.0;
      for (int k = 0; k < c; ++k) s += img.at(u, v, k);
      out.at(u, v) = s / c;
      out.set_valid(u, v, img.valid_at(u, v));
    }
  return out;
}

namespace {

// Shared box-mean kernel over an interleaved raster.
void box_mean(const double* src, const uint8_t* src_valid, int w, int h, int c,
              int factor, double* dst, uint8_t* dst_valid, int ow, int oh) {
  for (int ov = 0; ov < oh; ++ov) {
    const int v0 = ov * factor, v1 = std::min(v0 + factor, h);
    for (int ou = 0; ou < ow; ++ou) {
      const int u0 = ou * factor, u1 = std::min(u0 + factor, w);
      const int n = (v1 - v0) * (u1 - u0);
      bool ok = true;
      for (int k = 0; k < c; ++k) {
        double s = 0.0;
        for (int v = v0; v < v1; ++v)
          for (int u = u0; u < u1; ++u)
            s += src[(size_t(v) * w + u) * c + k];
        dst[(size_t(ov) * ow + ou) * c + k] = s / n;
      }
      for (int v = v0; v < v1 && ok; ++v)
        for (int u = u0; u < u1; ++u)
          if (!src_valid[size_t(v) * w + u]) {
            ok = false;
            break;
          }
      dst_valid[size_t(ov) * ow + ou] = ok ? 1 : 0;
    }
  }
}

}  // namespace

ScalarField downsample(const ScalarField& f, int factor) {
  if (factor < 1) throw std::invalid_argument("downsample: factor < 1");
  if (factor == 1) return f;
  const int ow = (f.width() + factor - 1) / factor;
  const int oh = (f.height() + factor - 1) / factor;
  ScalarField out(ow, oh);
  box_mean(f.data(), f.valid(), f.width(), f.height(), 1, factor, out.data(),
           out.valid(), ow, oh);
  return out;
}

Image downsample(const Image& img, int factor) {
  if (factor < 1) throw std::invalid_argument("downsample: factor < 1");
  if (factor == 1) return img;
  const int ow = (img.width() + factor - 1) / factor;
  const int oh = (img.height() + factor - 1) / factor;
  Image out(ow, oh, img.channels());
  box_mean(img.data(), img.valid(), img.width(), img.height(), img.channels(),
           factor, out.data(), out.valid(), ow, oh);
  return out;
}

}  // namespace warpgeo

#include "warpgeo/sampling.hpp"

#include <cmath>
#include <stdexcept>

#include "warpgeo/threading.hpp"

namespace warpgeo {

namespace {

struct Cell {
  int u0, v0;
  double du, dv;
  double w00, w01, w10, w11;
  bool ok;
};

// Shared corner/weight computation. w11 is completed to make the fixed-order
// sum ((w00+w01)+w10)+w11 equal 1.0 exactly, and exact integer coordinates
// collapse to w00 = 1 so identity-grid sampling reproduces the source
// bit-exactly.
Cell locate(const Image& src, double u, double v) {
  Cell c;
  const double fu = std::floor(u), fv = std::floor(v);
  c.u0 = int(fu);
  c.v0 = int(fv);
  c.ok = c.u0 >= 0 && c.u0 + 1 < src.width() && c.v0 >= 0 &&
         c.v0 + 1 < src.height();
  if (!c.ok) return c;
  c.ok = src.valid_at(c.u0, c.v0) && src.valid_at(c.u0 + 1, c.v0) &&
         src.valid_at(c.u0, c.v0 + 1) && src.valid_at(c.u0 + 1, c.v0 + 1);
  c.du = u - fu;
  c.dv = v - fv;
  c.w00 = (1.0 - c.du) * (1.0 - c.dv);
  c.w01 = c.du * (1.0 - c.dv);
  c.w10 = (1.0 - c.du) * c.dv;
  c.w11 = 1.0 - (c.w00 + c.w01 + c.w10);
  return c;
}

}  // namespace

SampledImage bilinear_sample(const Image& src, const VectorField& coords) {
  if (coords.channels() != 2)
    throw std::invalid_argument("bilinear_sample: coords must have 2 channels");
  const int W = coords.width(), H = coords.height(), C = src.channels();
  SampledImage out(W, H, C, 0.0, false);
  parallel_rows(H, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < W; ++u) {
        if (!coords.valid_at(u, v)) continue;
        const Cell c = locate(src, coords.at(u, v, 0), coords.at(u, v, 1));
        if (!c.ok) continue;
        for (int k = 0; k < C; ++k) {
          const double a = src.at(c.u0, c.v0, k);
          const double b = src.at(c.u0 + 1, c.v0, k);
          const double d = src.at(c.u0, c.v0 + 1, k);
          const double e = src.at(c.u0 + 1, c.v0 + 1, k);
          out.at(u, v, k) = c.w00 * a + c.w01 * b + c.w10 * d + c.w11 * e;
        }
        out.set_valid(u, v, true);
      }
  });
  return out;
}

SampleVjp bilinear_sample_vjp(const Image& src, const VectorField& coords,
                              const Image& upstream, bool want_grad_src) {
  if (coords.channels() != 2)
    throw std::invalid_argument("bilinear_sample_vjp: coords need 2 channels");
  if (upstream.width() != coords.width() ||
      upstream.height() != coords.height() ||
      upstream.channels() != src.channels())
    throw std::invalid_argument("bilinear_sample_vjp: upstream shape mismatch");
  const int W = coords.width(), H = coords.height(), C = src.channels();
  SampleVjp out;
  out.grad_coords = VectorField(W, H, 2, 0.0);
  parallel_rows(H, [&](int r0, int r1) {
    for (int v = r0; v < r1; ++v)
      for (int u = 0; u < W; ++u) {
        if (!coords.valid_at(u, v) || !upstream.valid_at(u, v)) continue;
        const Cell c = locate(src, coords.at(u, v, 0), coords.at(u, v, 1));
        if (!c.ok) continue;
        double gu = 0.0, gv = 0.0;
        for (int k = 0; k < C; ++k) {
          const double a = src.at(c.u0, c.v0, k);
          const double b = src.at(c.u0 + 1, c.v0, k);
          const double d = src.at(c.u0, c.v0 + 1, k);
          const double e = src.at(c.u0 + 1, c.v0 + 1, k);
          const double g = upstream.at(u, v, k);
          gu += g * ((1.0 - c.dv) * (b - a) + c.dv * (e - d));
          gv += g * ((1.0 - c.du) * (d - a) + c.du * (e - b));
        }
        out.grad_coords.at(u, v, 0) = gu;
        out.grad_coords.at(u, v, 1) = gv;
      }
  });
  if (want_grad_src) {
    out.grad_src = Image(src.width(), src.height(), C, 0.0);
    for (int v = 0; v < H; ++v)  // serial scatter: deterministic by order
      for (int u = 0; u < W; ++u) {
        if (!coords.valid_at(u, v) || !upstream.valid_at(u, v)) continue;
        const Cell c = locate(src, coords.at(u, v, 0), coords.at(u, v, 1));
        if (!c.ok) continue;
        for (int k = 0; k < C; ++k) {
          const double g = upstream.at(u, v, k);
          out.grad_src.at(c.u0, c.v0, k) += c.w00 * g;
          out.grad_src.at(c.u0 + 1, c.v0, k) += c.w01 * g;
          out.grad_src.at(c.u0, c.v0 + 1, k) += c.w10 * g;
          out.grad_src.at(c.u0 + 1, c.v0 + 1, k) += c.w11 * g;
        }
      }
  }
  return out;
}

}  // namespace warpgeo

#pragma once

#include "warpgeo/field.hpp"

namespace warpgeo {

// Synthesized view: per-channel values plus the validity mask that every
// loss respects. Invalid pixels carry value 0.
using SampledImage = Image;

// Differentiable bilinear interpolation. coords has 2 channels (u, v) in
// source pixel units. An output pixel is valid iff its coordinate is valid
// and all 4 surrounding source pixels are in bounds and valid — zero padding
// with masking, so out-of-frame samples never fabricate photometric error.
// Note this marks samples landing exactly on the last row/column invalid.
SampledImage bilinear_sample(const Image& src, const VectorField& coords);

// Reverse-mode derivatives. grad_coords comes from the piecewise-linear
// weight derivatives (right-hand limit on the integer lattice, so the value
// is deterministic there). grad_src scatters upstream mass onto the four
// corners; it is computed serially in row-major order for determinism and
// only when requested (source images are constants in the optimization
// loop). Invalid samples contribute nothing to either gradient.
struct SampleVjp {
  VectorField grad_coords;  // 2 channels
  Image grad_src;           // empty unless want_grad_src
};
SampleVjp bilinear_sample_vjp(const Image& src, const VectorField& coords,
                              const Image& upstream,
                              bool want_grad_src = false);

}  // namespace warpgeo

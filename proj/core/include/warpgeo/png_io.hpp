#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "warpgeo/field.hpp"

namespace warpgeo {

// 8-bit PNG writers for visualisation. Intensities are clamped to [0, 1]
// before quantisation; invalid pixels render black.
void write_png(const std::string& path, const Image& img);

// Depth heatmap. When lo == hi the range is taken from the valid pixels.
void write_depth_png(const std::string& path, const ScalarField& depth,
                     double lo = 0.0, double hi = 0.0);

// Unit normals mapped component-wise as (n + 1) / 2 into RGB.
void write_normal_png(const std::string& path, const VectorField& normals);

// Round-trip helper for tests: decodes any 8-bit PNG to packed RGB.
std::vector<uint8_t> read_png_rgb8(const std::string& path, int* width,
                                   int* height);

}  // namespace warpgeo

#pragma once

#include <string>

#include "warpgeo/field.hpp"

namespace warpgeo {

// Portable float map. Header is "Pf" (1 channel) or "PF" (3 channels),
// then "<width> <height>", then the scale whose sign encodes endianness
// (negative = little-endian). Scanlines are stored bottom-up. Values are
// float32 on disk; we widen to double in memory and write scale -1.0.
Image read_pfm(const std::string& path);
ScalarField read_pfm_scalar(const std::string& path);

void write_pfm(const std::string& path, const Image& img);
void write_pfm(const std::string& path, const ScalarField& f);

}  // namespace warpgeo

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace warpgeo {

// Dense row-major raster over pixel coordinates x = (u, v), where u indexes
// columns and v indexes rows. (0, 0) is the centre of the top-left pixel.
// Every field carries a per-pixel validity flag; operators propagate
// invalidity instead of throwing so that out-of-view warps stay cheap.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(int width, int height, double fill = 0.0, bool valid = true)
      : width_(width),
        height_(height),
        data_(size_t(width) * height, fill),
        valid_(size_t(width) * height, valid ? 1 : 0) {
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("ScalarField: non-positive extent");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }

  bool in_bounds(int u, int v) const {
    return u >= 0 && u < width_ && v >= 0 && v < height_;
  }
  size_t idx(int u, int v) const { return size_t(v) * width_ + u; }

  double& at(int u, int v) { return data_[idx(u, v)]; }
  double at(int u, int v) const { return data_[idx(u, v)]; }
  bool valid_at(int u, int v) const { return valid_[idx(u, v)] != 0; }
  void set_valid(int u, int v, bool ok) { valid_[idx(u, v)] = ok ? 1 : 0; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  uint8_t* valid() { return valid_.data(); }
  const uint8_t* valid() const { return valid_.data(); }

  bool same_shape(const ScalarField& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

 private:
  int width_ = 0, height_ = 0;
  std::vector<double> data_;
  std::vector<uint8_t> valid_;
};

// Interleaved multi-channel raster, data[(v*W + u)*C + c]. Validity is
// per pixel, shared across channels. Used for images (1 or 3 channels),
// normal maps (3 channels) and warp coordinate grids (2 channels).
class VectorField {
 public:
  VectorField() = default;
  VectorField(int width, int height, int channels, double fill = 0.0,
              bool valid = true)
      : width_(width),
        height_(height),
        channels_(channels),
        data_(size_t(width) * height * channels, fill),
        valid_(size_t(width) * height, valid ? 1 : 0) {
    if (width <= 0 || height <= 0 || channels <= 0)
      throw std::invalid_argument("VectorField: non-positive extent");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  size_t pixels() const { return size_t(width_) * height_; }
  size_t size() const { return data_.size(); }

  bool in_bounds(int u, int v) const {
    return u >= 0 && u < width_ && v >= 0 && v < height_;
  }
  size_t pix(int u, int v) const { return size_t(v) * width_ + u; }
  size_t idx(int u, int v, int c) const { return pix(u, v) * channels_ + c; }

  double& at(int u, int v, int c) { return data_[idx(u, v, c)]; }
  double at(int u, int v, int c) const { return data_[idx(u, v, c)]; }
  bool valid_at(int u, int v) const { return valid_[pix(u, v)] != 0; }
  void set_valid(int u, int v, bool ok) { valid_[pix(u, v)] = ok ? 1 : 0; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  uint8_t* valid() { return valid_.data(); }
  const uint8_t* valid() const { return valid_.data(); }

  bool same_shape(const VectorField& o) const {
    return width_ == o.width_ && height_ == o.height_ &&
           channels_ == o.channels_;
  }

 private:
  int width_ = 0, height_ = 0, channels_ = 0;
  std::vector<double> data_;
  std::vector<uint8_t> valid_;
};

// Images hold intensities in [0, 1].
using Image = VectorField;

// Channel-mean grayscale; 1-channel images pass through as a copy.
ScalarField grayscale(const Image& img);

// Area-mean downsampling by an integer factor. Ragged edge boxes (when the
// extent is not divisible by the factor) average over the partial box, so
// output dims are ceil(W/f) x ceil(H/f). A coarse pixel is valid iff every
// fine pixel in its box is valid.
ScalarField downsample(const ScalarField& f, int factor);
Image downsample(const Image& img, int factor);

}  // namespace warpgeo

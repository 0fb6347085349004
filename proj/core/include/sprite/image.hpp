#ifndef SPRITE_IMAGE_HPP
#define SPRITE_IMAGE_HPP

#include <array>
#include <cstddef>
#include <vector>

namespace sprite {

// 2-D raster stored row-major ("lines after lines"): pixel (i,j) lives at
// index i*width + j, i = row, j = column. pitch_scale is the ratio of this
// grid's pixel pitch to the high-resolution reference pitch (1 for HR
// frames, d for exposures decimated by d).
class Image {
 public:
  Image() = default;
  Image(int height, int width, double pitch_scale = 1.0);

  int width() const { return width_; }
  int height() const { return height_; }
  double pitch_scale() const { return pitch_scale_; }
  void set_pitch_scale(double s) { pitch_scale_ = s; }
  std::size_t size() const { return pixels_.size(); }

  double operator()(int i, int j) const { return pixels_[std::size_t(i) * width_ + j]; }
  double& operator()(int i, int j) { return pixels_[std::size_t(i) * width_ + j]; }
  double operator[](std::size_t k) const { return pixels_[k]; }
  double& operator[](std::size_t k) { return pixels_[k]; }

  const std::vector<double>& pixels() const { return pixels_; }
  std::vector<double>& pixels() { return pixels_; }
  const double* data() const { return pixels_.data(); }
  double* data() { return pixels_.data(); }
  const double* row(int i) const { return pixels_.data() + std::size_t(i) * width_; }
  double* row(int i) { return pixels_.data() + std::size_t(i) * width_; }

  bool same_dims(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool all_finite() const;
  double min_value() const;
  double max_value() const;

  // Throws input_error when dimensions are non-positive or a pixel is not finite.
  void validate() const;

 private:
  int width_ = 0;
  int height_ = 0;
  double pitch_scale_ = 1.0;
  std::vector<double> pixels_;
};

// One low-resolution exposure with its noise level, photometric factor and
// centroid shift (LR pixel units, relative to the stack's reference exposure).
struct LRExposure {
  Image image;
  double sigma = 1.0;
  double flux = 1.0;
  std::array<double, 2> shift = {0.0, 0.0};  // (row, column)

  void validate() const;
};

// Ordered set of same-sized exposures plus the target upsampling factor.
struct LRStack {
  std::vector<LRExposure> exposures;
  int upsampling = 1;

  int count() const { return int(exposures.size()); }
  int lr_width() const { return exposures.empty() ? 0 : exposures.front().image.width(); }
  int lr_height() const { return exposures.empty() ? 0 : exposures.front().image.height(); }
  int hr_width() const { return lr_width() * upsampling; }
  int hr_height() const { return lr_height() * upsampling; }

  void validate() const;
};

// Row-major lexicographic vectorization and its inverse.
std::vector<double> flatten(const Image& image);
Image unflatten(const std::vector<double>& values, int height, int width,
                double pitch_scale = 1.0);

// Keeps samples (d*i, d*j); the decimation matrix D applied as an operator.
Image decimate(const Image& hr, int d);

// Places lr(i,j) at (d*i, d*j), zeros elsewhere; the adjoint of decimate.
Image zero_pad_upsample(const Image& lr, int d);

// output(i,j) = image(i-di, j-dj), zero outside the raster.
Image integer_shift(const Image& image, int di, int dj);

}  // namespace sprite

#endif

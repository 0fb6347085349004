#include "sprite/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sprite/errors.hpp"

namespace sprite {

Image::Image(int height, int width, double pitch_scale)
    : width_(width), height_(height), pitch_scale_(pitch_scale) {
  if (width <= 0 || height <= 0)
    throw input_error("Image dimensions must be positive");
  pixels_.assign(std::size_t(width) * height, 0.0);
}

bool Image::all_finite() const {
  for (double v : pixels_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Image::min_value() const {
  return *std::min_element(pixels_.begin(), pixels_.end());
}

double Image::max_value() const {
  return *std::max_element(pixels_.begin(), pixels_.end());
}

void Image::validate() const {
  if (width_ <= 0 || height_ <= 0)
    throw input_error("Image dimensions must be positive");
  if (pixels_.size() != std::size_t(width_) * height_)
    throw input_error("Image pixel count does not match dimensions");
  if (!all_finite()) throw input_error("Image contains non-finite pixels");
}

void LRExposure::validate() const {
  image.validate();
  if (sigma <= 0.0) throw input_error("Exposure sigma must be positive");
  if (flux <= 0.0) throw input_error("Exposure flux must be positive");
  if (std::abs(shift[0]) >= image.height() || std::abs(shift[1]) >= image.width())
    throw input_error("Exposure shift lies outside the raster");
}

void LRStack::validate() const {
  if (exposures.empty()) throw input_error("Stack needs at least one exposure");
  if (upsampling < 1) throw input_error("Upsampling factor must be >= 1");
  for (const auto& e : exposures) {
    e.validate();
    if (!e.image.same_dims(exposures.front().image))
      throw input_error("All exposures must share dimensions");
  }
}

std::vector<double> flatten(const Image& image) { return image.pixels(); }

Image unflatten(const std::vector<double>& values, int height, int width,
                double pitch_scale) {
  if (values.size() != std::size_t(width) * height)
    throw input_error("unflatten: value count does not match dimensions");
  Image out(height, width, pitch_scale);
  std::copy(values.begin(), values.end(), out.pixels().begin());
  return out;
}

Image decimate(const Image& hr, int d) {
  if (d < 1) throw input_error("decimate: factor must be >= 1");
  if (hr.height() % d != 0 || hr.width() % d != 0)
    throw input_error("decimate: dimensions not divisible by factor");
  Image out(hr.height() / d, hr.width() / d, hr.pitch_scale() * d);
  for (int i = 0; i < out.height(); ++i)
    for (int j = 0; j < out.width(); ++j) out(i, j) = hr(d * i, d * j);
  return out;
}

Image zero_pad_upsample(const Image& lr, int d) {
  if (d < 1) throw input_error("zero_pad_upsample: factor must be >= 1");
  Image out(lr.height() * d, lr.width() * d, lr.pitch_scale() / d);
  for (int i = 0; i < lr.height(); ++i)
    for (int j = 0; j < lr.width(); ++j) out(d * i, d * j) = lr(i, j);
  return out;
}

Image integer_shift(const Image& image, int di, int dj) {
  Image out(image.height(), image.width(), image.pitch_scale());
  const int i0 = std::max(0, di), i1 = std::min(image.height(), image.height() + di);
  const int j0 = std::max(0, dj), j1 = std::min(image.width(), image.width() + dj);
  for (int i = i0; i < i1; ++i) {
    if (j1 > j0)
      std::memcpy(out.row(i) + j0, image.row(i - di) + (j0 - dj),
                  std::size_t(j1 - j0) * sizeof(double));
  }
  return out;
}

}  // namespace sprite

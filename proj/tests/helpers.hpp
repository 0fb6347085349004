#ifndef SPRITE_TESTS_HELPERS_HPP
#define SPRITE_TESTS_HELPERS_HPP

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "sprite/image.hpp"
#include "sprite/linalg.hpp"
#include "sprite/observation.hpp"

namespace sprite::testing {

inline Image random_image(int h, int w, std::uint64_t seed, double sigma = 1.0) {
  Image img(h, w);
  GaussianSampler rng(seed);
  rng.fill(img.pixels(), sigma);
  return img;
}

// Analytic Gaussian blob, centre in (row, col) pixel coordinates.
inline Image gaussian_blob(int h, int w, double ci, double cj, double sigma,
                           double amp = 1.0) {
  Image img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double di = i - ci, dj = j - cj;
      img(i, j) = amp * std::exp(-0.5 * (di * di + dj * dj) / (sigma * sigma));
    }
  return img;
}

// Materializes a matrix-free linear map column by column.
inline Eigen::MatrixXd dense_of(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    std::size_t in_dim, std::size_t out_dim) {
  Eigen::MatrixXd m(out_dim, in_dim);
  std::vector<double> e(in_dim, 0.0);
  for (std::size_t j = 0; j < in_dim; ++j) {
    e[j] = 1.0;
    const std::vector<double> col = apply(e);
    for (std::size_t i = 0; i < out_dim; ++i) m(long(i), long(j)) = col[i];
    e[j] = 0.0;
  }
  return m;
}

// Literal double-sum evaluation of the exposure prediction.
inline Image predict_exposure_oracle(const Image& x_hr,
                                     std::array<double, 2> shift, int d) {
  const int p_h = x_hr.height() / d, p_w = x_hr.width() / d;
  Image y(p_h, p_w);
  for (int i = 0; i < p_h; ++i)
    for (int j = 0; j < p_w; ++j) {
      double acc = 0.0;
      for (int l = 0; l < x_hr.height(); ++l)
        for (int m = 0; m < x_hr.width(); ++m)
          acc += lanczos4(l - d * (i - shift[0])) *
                 lanczos4(m - d * (j - shift[1])) * x_hr(l, m);
      y(i, j) = acc;
    }
  return y;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline double rel_l2_error(const Image& truth, const Image& est) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    num += (truth[k] - est[k]) * (truth[k] - est[k]);
    den += truth[k] * truth[k];
  }
  return std::sqrt(num / den);
}

inline double median_of(std::vector<double> v) { return median(std::move(v)); }

}  // namespace sprite::testing

#endif

#ifndef SPRITE_METRICS_HPP
#define SPRITE_METRICS_HPP

#include <array>
#include <utility>
#include <vector>

#include "sprite/image.hpp"

namespace sprite {

// Second-order weighted central moments. Axes follow the ellipticity
// convention: mu20 is the x (column) moment, mu02 the y (row) moment.
struct Moments {
  double mu20 = 0.0, mu02 = 0.0, mu11 = 0.0;
  std::array<double, 2> centroid = {0.0, 0.0};  // (row, column)
  double weighted_flux = 0.0;
};

// Gaussian weight window of width weight_sigma centred on the weighted
// centroid, iterated to consistency (<= 20 passes). weight_sigma <= 0 means
// uniform weights. Throws estimation_error on non-positive weighted flux.
Moments weighted_moments(const Image& image, double weight_sigma);

// e1 = (mu20 - mu02)/(mu20 + mu02), e2 = 2 mu11/(mu20 + mu02).
std::pair<double, double> ellipticity(const Moments& m);

// FWHM from a least-squares fit of an elliptical modified Lorentzian
// A / (1 + u^p) with u the normalized elliptical radius; the half-maximum
// locus is u = 1, so the fitted widths give the geometric-mean full width.
double fwhm_lorentzian(const Image& image);

struct ShapeMeasurement {
  double e1 = 0.0, e2 = 0.0;
  std::array<double, 2> centroid = {0.0, 0.0};
  double fwhm = 0.0;
  double mu20 = 0.0, mu02 = 0.0, mu11 = 0.0;
};

ShapeMeasurement measure_shape(const Image& image, double weight_sigma);

struct EllipticityErrorStats {
  double e1_mean = 0.0, e2_mean = 0.0;
  double e1_std = 0.0, e2_std = 0.0;
};

EllipticityErrorStats mean_abs_ellipticity_error(
    const std::vector<std::pair<double, double>>& truths,
    const std::vector<std::pair<double, double>>& recons);

double pearson_correlation(const Image& a, const Image& b);

// map = |truth - recon| and the standard deviation of that map.
std::pair<Image, double> error_map_stats(const Image& truth, const Image& recon);

}  // namespace sprite

#endif

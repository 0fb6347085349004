#ifndef SPRITE_ESTIMATION_HPP
#define SPRITE_ESTIMATION_HPP

#include <array>
#include <vector>

#include "sprite/image.hpp"

namespace sprite {

// Data-fidelity parameters recovered from the exposures themselves.
struct EstimationReport {
  std::vector<double> sigmas;
  std::vector<double> fluxes;                    // normalized so fluxes[0] == 1
  std::vector<std::array<double, 2>> shifts;     // relative to exposure 0
  std::vector<std::array<double, 2>> centroids;  // absolute, LR pixels
  double aperture_radius = 3.0;
  bool sigma_degenerate = false;  // MAD saw no noise; sigmas fell back to 1
};

struct EstimationOptions {
  bool estimate_noise = true;
  bool estimate_flux = true;
  double default_sigma = 1.0;    // used when estimate_noise is off
  double aperture_radius = 3.0;  // LR pixels
};

// 1.4826 * median(|x - median(x)|); 0 for a constant image.
double estimate_sigma_mad(const Image& image);

// min(4*sigma, (max|x|/sigma - 1)*sigma): keeps only high-SNR pixels.
double centroid_threshold(const Image& image, double sigma);

// Iteratively reweighted first moments under a Gaussian window after hard
// thresholding; returns (row, column) in pixel units. Throws estimation_error
// when nothing survives the threshold.
std::array<double, 2> estimate_centroid(const Image& image, double sigma);

// Per-exposure centroid differences against exposure 0.
std::vector<std::array<double, 2>> estimate_shifts(const LRStack& stack);

// Sum of the pixels whose centers lie within `radius` of the centroid.
double estimate_flux(const Image& image, std::array<double, 2> centroid,
                     double radius = 3.0);

// Full per-stack estimation; fills sigmas/fluxes/shifts per the options.
EstimationReport estimate_stack(const LRStack& stack,
                                const EstimationOptions& opts = {});

// Copy of `stack` with sigma/flux/shift fields replaced by the report values.
LRStack apply_report(const LRStack& stack, const EstimationReport& report);

}  // namespace sprite

#endif

#ifndef SPRITE_WAVELETS_HPP
#define SPRITE_WAVELETS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "sprite/image.hpp"

namespace sprite {

enum class Dictionary { starlet2, bior79 };

// Undecimated multi-scale analysis coefficients: J detail rasters followed by
// one coarse raster, all with the analyzed image's dimensions, stored
// contiguously band after band.
struct WaveletCoeffs {
  int height = 0, width = 0, levels = 0;
  Dictionary dict = Dictionary::starlet2;
  std::vector<double> data;
  std::vector<double> sigma_per_scale;  // optional, levels+1 entries
  std::vector<double> weights;          // optional, one entry per coefficient

  std::size_t band_size() const { return std::size_t(height) * width; }
  int band_count() const { return levels + 1; }
  double* band(int b) { return data.data() + band_size() * b; }
  const double* band(int b) const { return data.data() + band_size() * b; }
  std::span<double> band_span(int b) { return {band(b), band_size()}; }
  std::span<const double> band_span(int b) const { return {band(b), band_size()}; }
};

// The analysis dictionary Phi together with its exact adjoint and left
// inverse. Both dictionaries are a-trous schemes with mirror boundary: each
// level smooths the running approximation and defines the detail as the
// approximation minus a second smoothing of the result, which makes the
// reconstruction recursion exact by construction.
class WaveletTransform {
 public:
  WaveletTransform(int height, int width, Dictionary dict, int levels);

  int height() const { return height_; }
  int width() const { return width_; }
  int levels() const { return levels_; }
  Dictionary dictionary() const { return dict_; }
  std::size_t band_size() const { return std::size_t(height_) * width_; }
  std::size_t coeff_size() const { return band_size() * (levels_ + 1); }

  WaveletCoeffs analyze(const Image& x) const;
  void analyze_into(const Image& x, std::vector<double>& coeffs) const;

  // Exact adjoint Phi^T of analyze (not the inverse).
  Image adjoint(const WaveletCoeffs& coeffs) const;
  void adjoint_into(const std::vector<double>& coeffs, Image& out) const;

  // Left inverse: reconstruct(analyze(x)) == x.
  Image reconstruct(const WaveletCoeffs& coeffs) const;
  Image reconstruct(const std::vector<double>& coeffs) const;

  // rho(Phi Phi^T) by power iteration; memoized per (dims, dict, levels).
  double gram_spectral_radius() const;

 private:
  int height_, width_, levels_;
  Dictionary dict_;
};

// Per-scale noise std of the transform of unit white Gaussian noise, scaled
// by sigma_pixel. Monte-Carlo over `realizations` seeded draws; the unit
// answer is memoized per (dims, dict, levels).
std::vector<double> scale_noise_from_white(int height, int width, Dictionary dict,
                                           int levels, double sigma_pixel,
                                           int realizations = 50,
                                           std::uint64_t seed = 0x5ca1e5u);

// Per-scale noise of a transform with correlated noise: MAD estimate refined
// by soft-threshold/re-estimate passes (at most five).
std::vector<double> correlated_scale_noise(const WaveletCoeffs& coeffs,
                                           double k_thresh = 5.0);

enum class ThresholdMode { soft, hard };

// Per-scale thresholds (levels+1 entries, coarse entry ignored) or
// per-coefficient thresholds (full size). The coarse band is never touched.
WaveletCoeffs threshold_coeffs(WaveletCoeffs coeffs,
                               std::span<const double> thresholds,
                               ThresholdMode mode);

double soft_threshold(double value, double threshold);
double hard_threshold(double value, double threshold);

}  // namespace sprite

#endif

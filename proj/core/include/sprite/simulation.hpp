#ifndef SPRITE_SIMULATION_HPP
#define SPRITE_SIMULATION_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sprite/image.hpp"
#include "sprite/solvers.hpp"

namespace sprite {

enum class PsfKind { elliptical_gaussian, obscured_airy };

struct PsfParams {
  // elliptical gaussian, HR pixels
  double sigma_x = 2.0, sigma_y = 2.0, theta = 0.0;
  // obscured airy: first-null radius in HR pixels, obscuration and vane
  // width as fractions of the pupil radius
  double airy_first_null = 4.0;
  double obscuration = 0.3;
  double vane_width = 0.04;
};

// Nonnegative, peak-normalized synthetic PSF on the given raster.
Image make_psf(PsfKind kind, const PsfParams& params, int height, int width);

// Seeded random PSF parameters inside the benchmark's draw ranges.
PsfParams draw_psf_params(PsfKind kind, std::uint64_t seed);

// Empirical variance inside the 50x50 window centred on the peak pixel.
double snr_signal_level(const Image& hr);

struct SimSpec {
  PsfKind kind = PsfKind::elliptical_gaussian;
  PsfParams params;
  int n_exposures = 4;
  int d = 2;
  double snr_db = 30.0;
  std::array<double, 2> flux_range = {1.0, 1.0};  // uniform draw per exposure
  std::uint64_t seed = 0;
  // when non-empty, overrides the random draw (one entry per exposure)
  std::vector<std::array<double, 2>> fixed_shifts;
};

struct SyntheticStack {
  LRStack stack;            // noisy exposures, metadata fields left at defaults
  Image truth;              // the HR input
  Image truth_ref;          // truth warped into exposure 0's frame
  std::vector<std::array<double, 2>> shifts;      // absolute draws, LR pixels
  std::vector<std::array<double, 2>> rel_shifts;  // relative to exposure 0
  std::vector<double> fluxes;
  double noise_sigma = 0.0;
  double signal_level = 0.0;
};

// Warps, decimates and corrupts the truth into n exposures with sub-pixel
// shifts uniform in [-0.5, 0.5) LR pixels and white Gaussian noise at the
// requested SNR (dB, power ratio against snr_signal_level of the truth).
SyntheticStack synthesize_stack(const Image& truth_hr, const SimSpec& spec);

enum class Method {
  shift_add,
  quadratic,
  sprite_starlet2,
  sprite_bior79,
  sprite_no_positivity,
  sprite_k1,
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct BenchmarkSpec {
  std::vector<double> snrs_db = {10, 15, 20, 25, 30};
  int trials = 20;
  std::vector<Method> methods = {Method::shift_add, Method::quadratic,
                                 Method::sprite_starlet2};
  int lr_size = 84;
  int d = 2;
  int n_exposures = 4;
  PsfKind kind = PsfKind::elliptical_gaussian;
  bool randomize_psf = true;
  std::uint64_t seed = 0;
  double quad_reg_lambda = 1.0;
  SolverConfig solver;            // base config for the sprite variants
  double metric_weight_sigma = 7.5;  // HR pixels, shared by every method
  int jobs = 1;                   // worker threads over (snr, trial) cells
};

struct BenchmarkRow {
  double snr_db = 0.0;
  Method method = Method::shift_add;
  int trial = 0;
  bool ok = false;
  std::string error;
  double e1_err = 0.0, e2_err = 0.0;
  double fwhm_err_pct = 0.0;
  double errmap_std = 0.0;
  double pearson = 0.0;
  double runtime_s = 0.0;
};

struct BenchmarkAggregate {
  double snr_db = 0.0;
  Method method = Method::shift_add;
  int count = 0;
  double e1_err_mean = 0.0, e1_err_std = 0.0;
  double e2_err_mean = 0.0, e2_err_std = 0.0;
  double fwhm_err_pct_mean = 0.0, fwhm_err_pct_std = 0.0;
  double errmap_std_mean = 0.0, errmap_std_std = 0.0;
  double pearson_mean = 0.0, pearson_std = 0.0;
  double runtime_s_mean = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<BenchmarkAggregate> aggregates;
  int failures = 0;
  int cells = 0;
};

// Full grid: for each (snr, trial) a fresh synthetic stack is reconstructed
// by every method and scored against the registered truth. Deterministic in
// the spec seed; per-trial streams are independent of scheduling.
BenchmarkResult run_benchmark(const BenchmarkSpec& spec);

}  // namespace sprite

#endif

#ifndef SPRITE_SOLVERS_HPP
#define SPRITE_SOLVERS_HPP

#include <cstdint>
#include <vector>

#include "sprite/estimation.hpp"
#include "sprite/image.hpp"
#include "sprite/observation.hpp"
#include "sprite/prox.hpp"
#include "sprite/wavelets.hpp"

namespace sprite {

enum class LambdaCalibration { residual_mad, monte_carlo };

struct SolverConfig {
  double kappa = 4.0;
  Dictionary dict = Dictionary::starlet2;
  int levels = 4;
  double omega1 = 0.5, omega2 = 0.5;  // must sum to 1
  double mu = 0.0;                    // <= 0 selects 1/rho(M^T M)
  double relax = 1.4;
  int max_iters = 300;         // N_max for the splitting loop
  double rel_tol = 1e-5;       // early stop on iterate change
  int reweight_passes = 2;     // K_max
  bool positivity = true;
  LambdaCalibration lambda_mode = LambdaCalibration::residual_mad;
  bool lambda_refresh_each_iter = true;
  int mc_realizations = 50;
  std::uint64_t seed = 0;
  ProxConfig prox;
  ConvPath conv_path = ConvPath::automatic;

  void validate(double rho_normal) const;
};

struct IterationRecord {
  double j1 = 0.0;
  double penalty = 0.0;
  double objective = 0.0;  // j1 + penalty
  double step_rel_change = 0.0;
};

struct SolveDiagnostics {
  std::vector<IterationRecord> history;
  std::vector<double> lambda_per_scale;  // last calibrated values
  double rho_normal = 0.0;
  double mu = 0.0;
  int iterations = 0;
  bool hit_iteration_cap = false;
};

struct ShiftAndAddResult {
  Image image;
  Image hit_count;
  int holes_filled = 0;
};

// Registration to the nearest HR-grid offset, zero-pad upsampling, stacking
// and per-pixel normalization by the accumulated hit count. Exposures are
// divided by their flux factor before stacking. Unhit pixels are filled by
// iterative neighbour averaging.
ShiftAndAddResult shift_and_add_detailed(const LRStack& stack);
Image shift_and_add(const LRStack& stack);

// Wavelet-denoised shift-and-add image: detail scales hard-thresholded at
// five times their correlated-noise level.
Image first_guess(const LRStack& stack, Dictionary dict, int levels);

// Per-pixel median of the flux-normalized exposures interpolated onto the HR
// grid at their estimated shifts; the baseline's starting image.
Image registered_median(const LRStack& stack);

// Expected noise level of each coefficient of Phi applied to a gradient
// step: per-scale MAD of Phi(M^T residual) scaled by mu (coarse scale 0).
std::vector<double> calibrate_lambda_residual(const ObservationOperator& op,
                                              const WaveletTransform& wt,
                                              double mu,
                                              const std::vector<double>& residual);

// Same quantity estimated per coefficient over seeded unit-noise realizations.
std::vector<double> calibrate_lambda_monte_carlo(const ObservationOperator& op,
                                                 const WaveletTransform& wt,
                                                 double mu, int realizations,
                                                 std::uint64_t seed);

// Generalized forward-backward splitting for the weighted analysis prior plus
// the positivity set, both evaluated against the shifted iterate x0 + d.
// Returns the recovered increment over x0.
Image gfb_solve(const ObservationOperator& op, const std::vector<double>& z,
                const Image& x0, const std::vector<double>& weights,
                std::vector<double> lambda, const SolverConfig& cfg,
                SolveDiagnostics* diag = nullptr);

// w = 1 / (1 + |alpha| / (3 sigma)); sigma <= 0 leaves the weight at 1.
double reweight_value(double alpha, double sigma);

struct SpriteResult {
  Image solution;
  Image start;                  // the denoised first guess x0
  std::vector<Image> per_pass;  // x0 + increment after each reweighting pass
  EstimationReport estimation;
  SolveDiagnostics diag;
};

// Full pipeline: parameter estimation, first guess, reweighted solves.
SpriteResult sprite_reconstruct(const LRStack& stack, const SolverConfig& cfg,
                                const EstimationOptions& est_opts = {},
                                bool trust_stack_metadata = false);

struct QuadraticResult {
  Image solution;
  Image start;  // registered median image
  double cg_rel_residual = 0.0;
  int cg_iterations = 0;
  bool cg_converged = true;
};

// Quadratic-regularized baseline: conjugate gradient on the normal equations
// (M^T M + 2 lambda I) d = M^T (z - M x0) around the registered median.
QuadraticResult quadratic_baseline(const LRStack& stack, double reg_lambda,
                                   ConvPath path = ConvPath::automatic,
                                   int cg_max_iters = 500,
                                   double cg_rel_tol = 1e-10);

}  // namespace sprite

#endif

#include "sprite/prox.hpp"

#include <cmath>

#include "sprite/errors.hpp"
#include "sprite/linalg.hpp"

namespace sprite {

std::vector<double> project_positive_shift(std::vector<double> x,
                                           const std::vector<double>& x0) {
  if (x.size() != x0.size())
    throw input_error("project_positive_shift: length mismatch");
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::max(x[k], -x0[k]);
  return x;
}

void project_positive_shift_inplace(Image& x, const Image& x0) {
  if (!x.same_dims(x0))
    throw input_error("project_positive_shift: dimension mismatch");
  double* a = x.data();
  const double* b = x0.data();
  for (std::size_t k = 0; k < x.size(); ++k) a[k] = std::max(a[k], -b[k]);
}

AnalysisProx::AnalysisProx(const WaveletTransform& transform, ProxConfig cfg)
    : wt_(transform), cfg_(cfg) {
  if (cfg_.inner_max_iters < 1)
    throw input_error("AnalysisProx: inner_max_iters must be >= 1");
  mu_prox_ = cfg_.mu_prox > 0 ? cfg_.mu_prox : 1.0 / wt_.gram_spectral_radius();
  u_.assign(wt_.coeff_size(), 0.0);
}

void AnalysisProx::reset_dual() { std::fill(u_.begin(), u_.end(), 0.0); }

Image AnalysisProx::apply(const Image& x, std::span<const double> thresholds) {
  if (thresholds.size() != wt_.coeff_size())
    throw input_error("AnalysisProx: threshold vector size mismatch");
  last_iters_ = 0;
  double max_thr = 0.0;
  for (double t : thresholds) max_thr = std::max(max_thr, t);
  if (max_thr == 0.0) {  // zero penalty, prox is the identity
    reset_dual();
    return x;
  }
  if (!cfg_.warm_start) reset_dual();
  Image out;
  last_iters_ = detail::analysis_prox_run(wt_, x, thresholds, mu_prox_,
                                          cfg_.inner_max_iters, cfg_.inner_rel_tol,
                                          u_, phi_r_, back_, residual_, out);
  return out;
}

Image analysis_prox(const Image& x, std::span<const double> thresholds,
                    const WaveletTransform& transform, const ProxConfig& cfg) {
  AnalysisProx prox(transform, cfg);
  return prox.apply(x, thresholds);
}

}  // namespace sprite

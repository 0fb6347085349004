#ifndef SPRITE_PROX_HPP
#define SPRITE_PROX_HPP

#include <algorithm>
#include <span>
#include <vector>

#include "sprite/image.hpp"
#include "sprite/wavelets.hpp"

namespace sprite {

struct ProxConfig {
  double mu_prox = 0.0;  // <= 0 selects 1/rho(Phi Phi^T)
  int inner_max_iters = 50;
  double inner_rel_tol = 1e-6;
  bool warm_start = false;
};

// Projection onto {t : t >= -x0}, component-wise max(x_i, -x0_i).
std::vector<double> project_positive_shift(std::vector<double> x,
                                           const std::vector<double>& x0);
void project_positive_shift_inplace(Image& x, const Image& x0);

namespace detail {

// Forward-backward iterations on the dual of the weighted analysis-l1 prox:
//   u <- clamp(u + mu_prox * Phi(x - Phi^T u), [-t_j, t_j])
// until the dual settles; the prox value is x - Phi^T u. Dict provides
// coeff_size(), analyze_into(Image, vector&) and adjoint_into(vector, Image&).
template <class Dict>
int analysis_prox_run(const Dict& dict, const Image& x,
                      std::span<const double> thresholds, double mu_prox,
                      int max_iters, double rel_tol, std::vector<double>& u,
                      std::vector<double>& phi_r, Image& back, Image& residual,
                      Image& out) {
  int iters = 0;
  for (int p = 0; p < max_iters; ++p) {
    dict.adjoint_into(u, back);
    residual = x;
    {
      double* r = residual.data();
      const double* b = back.data();
      for (std::size_t k = 0; k < residual.size(); ++k) r[k] -= b[k];
    }
    dict.analyze_into(residual, phi_r);
    double delta_sq = 0.0, norm_sq = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      double v = u[k] + mu_prox * phi_r[k];
      v = std::clamp(v, -thresholds[k], thresholds[k]);
      const double dv = v - u[k];
      delta_sq += dv * dv;
      norm_sq += v * v;
      u[k] = v;
    }
    iters = p + 1;
    if (delta_sq <= rel_tol * rel_tol * std::max(norm_sq, 1e-300)) break;
  }
  dict.adjoint_into(u, back);
  out = x;
  {
    double* o = out.data();
    const double* b = back.data();
    for (std::size_t k = 0; k < out.size(); ++k) o[k] -= b[k];
  }
  return iters;
}

}  // namespace detail

// Prox of sum_j t_j |(Phi x)_j| for the wavelet dictionaries; holds scratch
// (and optionally a warm-started dual) across calls.
class AnalysisProx {
 public:
  AnalysisProx(const WaveletTransform& transform, ProxConfig cfg);

  Image apply(const Image& x, std::span<const double> thresholds);

  const std::vector<double>& dual() const { return u_; }
  int last_iterations() const { return last_iters_; }
  void reset_dual();

 private:
  const WaveletTransform& wt_;
  ProxConfig cfg_;
  double mu_prox_;
  std::vector<double> u_, phi_r_;
  Image back_, residual_;
  int last_iters_ = 0;
};

// One-shot convenience wrapper.
Image analysis_prox(const Image& x, std::span<const double> thresholds,
                    const WaveletTransform& transform, const ProxConfig& cfg);

}  // namespace sprite

#endif

#include "sprite/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sprite/errors.hpp"
#include "sprite/linalg.hpp"

namespace sprite {

namespace {

std::vector<double> expand_per_scale(const WaveletTransform& wt,
                                     const std::vector<double>& per_scale) {
  std::vector<double> out(wt.coeff_size());
  const std::size_t bs = wt.band_size();
  for (int b = 0; b <= wt.levels(); ++b)
    std::fill(out.begin() + bs * b, out.begin() + bs * (b + 1), per_scale[b]);
  return out;
}

// Per-scale noise of Phi applied to an M^T-pushed residual, scaled by mu.
// The coarse scale is never penalized and gets 0.
std::vector<double> lambda_scales_from_gradient(const WaveletTransform& wt,
                                                const std::vector<double>& coeffs,
                                                double mu) {
  std::vector<double> scales(wt.levels() + 1, 0.0);
  const std::size_t bs = wt.band_size();
  std::vector<double> band(bs);
  for (int b = 0; b < wt.levels(); ++b) {
    std::copy(coeffs.begin() + bs * b, coeffs.begin() + bs * (b + 1), band.begin());
    scales[b] = mu * 1.4826 * mad(band);
  }
  return scales;
}

Image add_images(const Image& a, const Image& b) {
  Image out = a;
  const double* pb = b.data();
  double* pa = out.data();
  for (std::size_t k = 0; k < out.size(); ++k) pa[k] += pb[k];
  return out;
}

}  // namespace

void SolverConfig::validate(double rho_normal) const {
  if (kappa < 0) throw input_error("SolverConfig: kappa must be >= 0");
  if (levels < 1) throw input_error("SolverConfig: levels must be >= 1");
  if (max_iters < 1 || reweight_passes < 1)
    throw input_error("SolverConfig: iteration counts must be >= 1");
  if (!(omega1 > 0 && omega1 < 1 && omega2 > 0 && omega2 < 1) ||
      std::abs(omega1 + omega2 - 1.0) > 1e-12)
    throw input_error("SolverConfig: omega1, omega2 must lie in (0,1) and sum to 1");
  if (rho_normal <= 0) throw input_error("SolverConfig: operator has zero spectral radius");
  const double mu_eff = mu > 0 ? mu : 1.0 / rho_normal;
  if (mu_eff >= 2.0 / rho_normal)
    throw input_error("SolverConfig: mu outside ]0, 2/rho(M^T M)[");
  const double relax_max = std::min(1.5, 0.5 * (1.0 + 2.0 / (rho_normal * mu_eff)));
  if (!(relax > 0 && relax < relax_max))
    throw input_error("SolverConfig: relaxation outside ]0, " +
                      std::to_string(relax_max) + "[");
}

ShiftAndAddResult shift_and_add_detailed(const LRStack& stack) {
  stack.validate();
  const int d = stack.upsampling;
  const int hr_h = stack.hr_height(), hr_w = stack.hr_width();
  Image acc(hr_h, hr_w), hits(hr_h, hr_w);
  for (const auto& exp : stack.exposures) {
    const int dr = int(std::lround(d * exp.shift[0]));
    const int dc = int(std::lround(d * exp.shift[1]));
    const double inv_flux = 1.0 / exp.flux;
    for (int i = 0; i < exp.image.height(); ++i) {
      const int u = d * i - dr;
      if (u < 0 || u >= hr_h) continue;
      for (int j = 0; j < exp.image.width(); ++j) {
        const int v = d * j - dc;
        if (v < 0 || v >= hr_w) continue;
        acc(u, v) += inv_flux * exp.image(i, j);
        hits(u, v) += 1.0;
      }
    }
  }

  ShiftAndAddResult res;
  res.hit_count = hits;
  res.image = Image(hr_h, hr_w, acc.pitch_scale());
  std::vector<std::pair<int, int>> holes;
  for (int i = 0; i < hr_h; ++i)
    for (int j = 0; j < hr_w; ++j) {
      if (hits(i, j) > 0)
        res.image(i, j) = acc(i, j) / hits(i, j);
      else
        holes.emplace_back(i, j);
    }
  if (holes.size() == res.image.size())
    throw estimation_error("shift_and_add: no exposure hits the HR grid");

  // fill holes from already-populated 3x3 neighbourhoods, sweeping until done
  Image known(hr_h, hr_w);
  for (int i = 0; i < hr_h; ++i)
    for (int j = 0; j < hr_w; ++j) known(i, j) = hits(i, j) > 0 ? 1.0 : 0.0;
  res.holes_filled = int(holes.size());
  while (!holes.empty()) {
    std::vector<std::pair<int, int>> remaining;
    std::vector<std::pair<std::pair<int, int>, double>> filled_now;
    for (auto [i, j] : holes) {
      double sum = 0.0;
      int cnt = 0;
      for (int a = std::max(0, i - 1); a <= std::min(hr_h - 1, i + 1); ++a)
        for (int b = std::max(0, j - 1); b <= std::min(hr_w - 1, j + 1); ++b)
          if (known(a, b) > 0) {
            sum += res.image(a, b);
            ++cnt;
          }
      if (cnt > 0)
        filled_now.push_back({{i, j}, sum / cnt});
      else
        remaining.push_back({i, j});
    }
    for (auto& [pos, val] : filled_now) {
      res.image(pos.first, pos.second) = val;
      known(pos.first, pos.second) = 1.0;
    }
    if (filled_now.empty()) break;  // isolated region, cannot happen with >=1 hit
    holes = std::move(remaining);
  }
  return res;
}

Image shift_and_add(const LRStack& stack) {
  return shift_and_add_detailed(stack).image;
}

Image first_guess(const LRStack& stack, Dictionary dict, int levels) {
  const Image saa = shift_and_add(stack);
  WaveletTransform wt(saa.height(), saa.width(), dict, levels);
  WaveletCoeffs coeffs = wt.analyze(saa);
  coeffs.sigma_per_scale = correlated_scale_noise(coeffs, 5.0);
  std::vector<double> beta(coeffs.sigma_per_scale.size());
  for (std::size_t b = 0; b < beta.size(); ++b)
    beta[b] = 5.0 * coeffs.sigma_per_scale[b];
  return wt.reconstruct(threshold_coeffs(std::move(coeffs), beta, ThresholdMode::hard));
}

Image registered_median(const LRStack& stack) {
  stack.validate();
  const int d = stack.upsampling;
  const int hr_h = stack.hr_height(), hr_w = stack.hr_width();
  const int n = stack.count();
  std::vector<Image> regs;
  regs.reserve(n);
  for (const auto& exp : stack.exposures) {
    const Image& y = exp.image;
    // interpolate exposure at LR coordinate (u/d + shift) separably
    Image t(hr_h, y.width());
    for (int u = 0; u < hr_h; ++u) {
      const double xi = double(u) / d + exp.shift[0];
      const int i0 = int(std::floor(xi)) - 3;
      for (int t8 = 0; t8 < 8; ++t8) {
        const int i = i0 + t8;
        if (i < 0 || i >= y.height()) continue;
        const double g = lanczos4(i - xi);
        if (g == 0.0) continue;
        double* dst = t.row(u);
        const double* src = y.row(i);
        for (int j = 0; j < y.width(); ++j) dst[j] += g * src[j];
      }
    }
    Image x(hr_h, hr_w, y.pitch_scale() / d);
    for (int v = 0; v < hr_w; ++v) {
      const double xj = double(v) / d + exp.shift[1];
      const int j0 = int(std::floor(xj)) - 3;
      for (int t8 = 0; t8 < 8; ++t8) {
        const int j = j0 + t8;
        if (j < 0 || j >= y.width()) continue;
        const double g = lanczos4(j - xj);
        if (g == 0.0) continue;
        for (int u = 0; u < hr_h; ++u) x(u, v) += g * t(u, j);
      }
    }
    const double inv_flux = 1.0 / exp.flux;
    for (double& v : x.pixels()) v *= inv_flux;
    regs.push_back(std::move(x));
  }
  Image med(hr_h, hr_w, regs.front().pitch_scale());
  std::vector<double> vals(n);
  for (std::size_t k = 0; k < med.size(); ++k) {
    for (int r = 0; r < n; ++r) vals[r] = regs[r][k];
    med[k] = median(vals);
  }
  return med;
}

std::vector<double> calibrate_lambda_residual(const ObservationOperator& op,
                                              const WaveletTransform& wt,
                                              double mu,
                                              const std::vector<double>& residual) {
  const Image pushed = op.adjoint(residual);
  std::vector<double> coeffs;
  wt.analyze_into(pushed, coeffs);
  return expand_per_scale(wt, lambda_scales_from_gradient(wt, coeffs, mu));
}

std::vector<double> calibrate_lambda_monte_carlo(const ObservationOperator& op,
                                                 const WaveletTransform& wt,
                                                 double mu, int realizations,
                                                 std::uint64_t seed) {
  if (realizations < 2)
    throw input_error("calibrate_lambda_monte_carlo: need >= 2 realizations");
  const std::size_t m = wt.coeff_size();
  std::vector<double> sum(m, 0.0), sumsq(m, 0.0), coeffs;
  std::vector<double> noise(op.data_size());
  for (int r = 0; r < realizations; ++r) {
    GaussianSampler rng(derive_seed(seed, r));
    rng.fill(noise);
    const Image pushed = op.adjoint(noise);
    wt.analyze_into(pushed, coeffs);
    for (std::size_t k = 0; k < m; ++k) {
      sum[k] += coeffs[k];
      sumsq[k] += coeffs[k] * coeffs[k];
    }
  }
  std::vector<double> lambda(m, 0.0);
  const std::size_t detail_end = wt.band_size() * wt.levels();
  for (std::size_t k = 0; k < detail_end; ++k) {
    const double mean = sum[k] / realizations;
    const double var = std::max(0.0, sumsq[k] / realizations - mean * mean);
    lambda[k] = mu * std::sqrt(var);
  }
  return lambda;
}

double reweight_value(double alpha, double sigma) {
  if (sigma <= 0.0) return 1.0;
  return 1.0 / (1.0 + std::abs(alpha) / (3.0 * sigma));
}

Image gfb_solve(const ObservationOperator& op, const std::vector<double>& z,
                const Image& x0, const std::vector<double>& weights,
                std::vector<double> lambda, const SolverConfig& cfg,
                SolveDiagnostics* diag) {
  const int h = op.hr_height(), w = op.hr_width();
  if (x0.height() != h || x0.width() != w)
    throw input_error("gfb_solve: first guess dimensions mismatch");
  WaveletTransform wt(h, w, cfg.dict, cfg.levels);
  if (weights.size() != wt.coeff_size() || lambda.size() != wt.coeff_size())
    throw input_error("gfb_solve: weight/lambda vector size mismatch");

  const double rho = spectral_radius_normal(op).value;
  cfg.validate(rho);
  const double mu = cfg.mu > 0 ? cfg.mu : 1.0 / rho;
  const double thr_factor = cfg.positivity ? cfg.kappa / cfg.omega1 : cfg.kappa;

  AnalysisProx prox(wt, cfg.prox);
  std::vector<double> thresholds(wt.coeff_size());
  auto refresh_thresholds = [&]() {
    for (std::size_t k = 0; k < thresholds.size(); ++k)
      thresholds[k] = thr_factor * weights[k] * lambda[k];
  };
  refresh_thresholds();

  Image d(h, w), z1(h, w), z2(h, w);
  Image t1(h, w), t2(h, w);
  std::vector<double> alpha_d;
  std::vector<double> lambda_scales(cfg.levels + 1, 0.0);

  SolveDiagnostics local;
  SolveDiagnostics& dg = diag ? *diag : local;
  dg.history.clear();
  dg.rho_normal = rho;
  dg.mu = mu;

  double obj0 = 0.0;
  const double z_scale = dot(z, z);
  for (int n = 0; n < cfg.max_iters; ++n) {
    double j1 = 0.0;
    Image grad = op.gradient(add_images(d, x0), z, &j1);

    if (cfg.lambda_refresh_each_iter &&
        cfg.lambda_mode == LambdaCalibration::residual_mad) {
      std::vector<double> coeffs;
      wt.analyze_into(grad, coeffs);
      lambda_scales = lambda_scales_from_gradient(wt, coeffs, mu);
      lambda = expand_per_scale(wt, lambda_scales);
      refresh_thresholds();
    }

    // composite objective at the current iterate
    wt.analyze_into(d, alpha_d);
    double penalty = 0.0;
    for (std::size_t k = 0; k < alpha_d.size(); ++k)
      penalty += weights[k] * lambda[k] * std::abs(alpha_d[k]);
    penalty *= cfg.kappa;
    IterationRecord rec;
    rec.j1 = j1;
    rec.penalty = penalty;
    rec.objective = j1 + penalty;
    if (n == 0) obj0 = rec.objective;
    if (rec.objective > 10.0 * obj0 + 1e-9 * (1.0 + z_scale))
      throw solver_error("gfb_solve: objective diverged at iteration " +
                         std::to_string(n));

    for (double& g : grad.pixels()) g *= mu;

    Image d_next(h, w);
    if (cfg.positivity) {
      // analysis-prior branch
      for (std::size_t k = 0; k < d.size(); ++k)
        t1[k] = 2.0 * d[k] - z1[k] - grad[k];
      const Image a1 = prox.apply(t1, thresholds);
      for (std::size_t k = 0; k < d.size(); ++k)
        z1[k] += cfg.relax * (a1[k] - d[k]);
      // positivity branch
      for (std::size_t k = 0; k < d.size(); ++k)
        t2[k] = 2.0 * d[k] - z2[k] - grad[k];
      project_positive_shift_inplace(t2, x0);
      for (std::size_t k = 0; k < d.size(); ++k)
        z2[k] += cfg.relax * (t2[k] - d[k]);
      for (std::size_t k = 0; k < d.size(); ++k)
        d_next[k] = cfg.omega1 * z1[k] + cfg.omega2 * z2[k];
    } else {
      // plain relaxed forward-backward on the analysis prior alone
      for (std::size_t k = 0; k < d.size(); ++k) t1[k] = d[k] - grad[k];
      const Image a1 = prox.apply(t1, thresholds);
      for (std::size_t k = 0; k < d.size(); ++k)
        d_next[k] = d[k] + cfg.relax * (a1[k] - d[k]);
    }

    double dsq = 0.0, nsq = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double dv = d_next[k] - d[k];
      dsq += dv * dv;
      nsq += d[k] * d[k];
    }
    rec.step_rel_change = std::sqrt(dsq) / std::max(std::sqrt(nsq), 1e-300);
    dg.history.push_back(rec);
    d = std::move(d_next);
    dg.iterations = n + 1;
    if (n > 0 && rec.step_rel_change < cfg.rel_tol) break;
  }
  dg.hit_iteration_cap = dg.iterations >= cfg.max_iters;
  dg.lambda_per_scale = lambda_scales;
  if (!cfg.lambda_refresh_each_iter ||
      cfg.lambda_mode != LambdaCalibration::residual_mad) {
    dg.lambda_per_scale.assign(cfg.levels + 1, 0.0);
  }

  // the limit point satisfies the constraint; make the finite iterate do too
  if (cfg.positivity) project_positive_shift_inplace(d, x0);
  return d;
}

SpriteResult sprite_reconstruct(const LRStack& stack, const SolverConfig& cfg,
                                const EstimationOptions& est_opts,
                                bool trust_stack_metadata) {
  stack.validate();
  SpriteResult res;
  if (trust_stack_metadata) {
    res.estimation.sigmas.resize(stack.count());
    res.estimation.fluxes.resize(stack.count());
    res.estimation.shifts.resize(stack.count());
    for (int k = 0; k < stack.count(); ++k) {
      res.estimation.sigmas[k] = stack.exposures[k].sigma;
      res.estimation.fluxes[k] = stack.exposures[k].flux;
      res.estimation.shifts[k] = stack.exposures[k].shift;
    }
  } else {
    res.estimation = estimate_stack(stack, est_opts);
  }
  const LRStack work =
      trust_stack_metadata ? stack : apply_report(stack, res.estimation);

  ObservationOperator op(work, cfg.conv_path);
  WaveletTransform wt(op.hr_height(), op.hr_width(), cfg.dict, cfg.levels);
  res.start = first_guess(work, cfg.dict, cfg.levels);
  const std::vector<double> z = op.weighted_data(work);

  const double rho = spectral_radius_normal(op).value;
  SolverConfig run_cfg = cfg;
  run_cfg.mu = cfg.mu > 0 ? cfg.mu : 1.0 / rho;

  std::vector<double> lambda;
  if (cfg.lambda_mode == LambdaCalibration::monte_carlo) {
    lambda = calibrate_lambda_monte_carlo(op, wt, run_cfg.mu, cfg.mc_realizations,
                                          derive_seed(cfg.seed, 0x11a));
  } else {
    double j1 = 0.0;
    const Image grad0 = op.gradient(res.start, z, &j1);
    std::vector<double> coeffs;
    wt.analyze_into(grad0, coeffs);
    lambda = expand_per_scale(
        wt, lambda_scales_from_gradient(wt, coeffs, run_cfg.mu));
  }

  std::vector<double> weights(wt.coeff_size(), 1.0);
  std::vector<double> alpha;
  for (int pass = 0; pass < cfg.reweight_passes; ++pass) {
    SolveDiagnostics diag;
    const Image delta = gfb_solve(op, z, res.start, weights, lambda, run_cfg, &diag);

    // fold per-pass history into the aggregate record
    res.diag.rho_normal = diag.rho_normal;
    res.diag.mu = diag.mu;
    res.diag.iterations += diag.iterations;
    res.diag.hit_iteration_cap |= diag.hit_iteration_cap;
    res.diag.history.insert(res.diag.history.end(), diag.history.begin(),
                            diag.history.end());

    // refreshed per-scale noise carries into the weight update and next pass
    std::vector<double> lambda_next = lambda;
    if (cfg.lambda_refresh_each_iter &&
        cfg.lambda_mode == LambdaCalibration::residual_mad) {
      lambda_next = expand_per_scale(wt, diag.lambda_per_scale);
      res.diag.lambda_per_scale = diag.lambda_per_scale;
    }

    wt.analyze_into(delta, alpha);
    for (std::size_t k = 0; k < weights.size(); ++k)
      weights[k] = reweight_value(alpha[k], lambda_next[k]);
    lambda = std::move(lambda_next);

    res.per_pass.push_back(add_images(res.start, delta));
  }
  res.solution = res.per_pass.back();
  return res;
}

QuadraticResult quadratic_baseline(const LRStack& stack, double reg_lambda,
                                   ConvPath path, int cg_max_iters,
                                   double cg_rel_tol) {
  if (reg_lambda < 0) throw input_error("quadratic_baseline: lambda must be >= 0");
  stack.validate();
  QuadraticResult res;
  res.start = registered_median(stack);
  ObservationOperator op(stack, path);
  const std::vector<double> z = op.weighted_data(stack);

  std::vector<double> fwd = op.forward(res.start);
  std::vector<double> rhs_data(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) rhs_data[k] = z[k] - fwd[k];
  const std::vector<double> rhs = flatten(op.adjoint(rhs_data));

  const int h = op.hr_height(), w = op.hr_width();
  auto apply = [&](const std::vector<double>& v) {
    std::vector<double> out = flatten(op.normal_apply(unflatten(v, h, w)));
    if (reg_lambda > 0) axpy(2.0 * reg_lambda, v, out);
    return out;
  };
  CGResult cg = conjugate_gradient(apply, rhs, cg_rel_tol, cg_max_iters);
  res.cg_rel_residual = cg.rel_residual;
  res.cg_iterations = cg.iterations;
  res.cg_converged = cg.converged;

  res.solution = res.start;
  double* p = res.solution.data();
  for (std::size_t k = 0; k < cg.x.size(); ++k) p[k] += cg.x[k];
  return res;
}

}  // namespace sprite

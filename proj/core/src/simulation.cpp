#include "sprite/simulation.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <thread>

#include "sprite/errors.hpp"
#include "sprite/linalg.hpp"
#include "sprite/metrics.hpp"
#include "sprite/observation.hpp"

namespace sprite {

namespace {

Image gaussian_psf(const PsfParams& p, int h, int w) {
  if (p.sigma_x <= 0 || p.sigma_y <= 0)
    throw input_error("make_psf: gaussian widths must be positive");
  Image out(h, w);
  const double yc = 0.5 * (h - 1), xc = 0.5 * (w - 1);
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double dx = j - xc, dy = i - yc;
      const double xr = c * dx + s * dy, yr = -s * dx + c * dy;
      out(i, j) = std::exp(-0.5 * (xr * xr / (p.sigma_x * p.sigma_x) +
                                   yr * yr / (p.sigma_y * p.sigma_y)));
    }
  return out;
}

std::mutex& sim_plan_mutex() {
  static std::mutex m;
  return m;
}

Image airy_psf(const PsfParams& p, int h, int w) {
  if (p.airy_first_null <= 0 || p.obscuration < 0 || p.obscuration >= 1)
    throw input_error("make_psf: invalid airy parameters");
  const int n = 512;
  if (h > n || w > n) throw input_error("make_psf: raster too large for pupil grid");
  // first Airy null at 1.22 N / (2 R) grid pixels
  const double radius = 1.22 * n / (2.0 * p.airy_first_null);
  if (2.0 * radius >= n)
    throw input_error("make_psf: airy_first_null too small for pupil grid");

  std::vector<std::complex<double>> pupil(std::size_t(n) * n, 0.0);
  const double c = n / 2.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double dy = i - c, dx = j - c;
      const double r = std::hypot(dx, dy);
      if (r > radius || r < p.obscuration * radius) continue;
      // three spider vanes every 120 degrees
      bool blocked = false;
      for (int v = 0; v < 3 && !blocked; ++v) {
        const double a = v * 2.0 * std::numbers::pi / 3.0;
        const double along = dx * std::cos(a) + dy * std::sin(a);
        const double across = -dx * std::sin(a) + dy * std::cos(a);
        if (along >= 0 && std::abs(across) < 0.5 * p.vane_width * radius)
          blocked = true;
      }
      if (!blocked) pupil[std::size_t(i) * n + j] = 1.0;
    }

  std::vector<std::complex<double>> field(pupil.size());
  {
    std::lock_guard lock(sim_plan_mutex());
    fftw_plan plan = fftw_plan_dft_2d(
        n, n, reinterpret_cast<fftw_complex*>(pupil.data()),
        reinterpret_cast<fftw_complex*>(field.data()), FFTW_FORWARD,
        FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }

  Image out(h, w);
  double peak = 0.0;
  const int ci = n / 2, cj = n / 2;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      // fftshift: PSF centre sits at the grid centre
      const int u = (i - h / 2 + ci + n) % n;
      const int v = (j - w / 2 + cj + n) % n;
      const double val = std::norm(field[std::size_t(u) * n + v]);
      out(i, j) = val;
      peak = std::max(peak, val);
    }
  if (peak <= 0) throw input_error("make_psf: empty pupil");
  for (double& v : out.pixels()) v /= peak;
  return out;
}

}  // namespace

Image make_psf(PsfKind kind, const PsfParams& params, int height, int width) {
  if (height <= 0 || width <= 0) throw input_error("make_psf: bad dimensions");
  Image psf = kind == PsfKind::elliptical_gaussian ? gaussian_psf(params, height, width)
                                                   : airy_psf(params, height, width);
  const double peak = psf.max_value();
  for (double& v : psf.pixels()) v = std::max(v / peak, 0.0);
  return psf;
}

double snr_signal_level(const Image& hr) {
  if (hr.height() < 50 || hr.width() < 50)
    throw input_error("snr_signal_level: image smaller than the 50x50 window");
  int pi = 0, pj = 0;
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < hr.height(); ++i)
    for (int j = 0; j < hr.width(); ++j)
      if (hr(i, j) > peak) {
        peak = hr(i, j);
        pi = i;
        pj = j;
      }
  int i0 = std::clamp(pi - 25, 0, hr.height() - 50);
  int j0 = std::clamp(pj - 25, 0, hr.width() - 50);
  double mean = 0.0;
  for (int i = i0; i < i0 + 50; ++i)
    for (int j = j0; j < j0 + 50; ++j) mean += hr(i, j);
  mean /= 2500.0;
  double var = 0.0;
  for (int i = i0; i < i0 + 50; ++i)
    for (int j = j0; j < j0 + 50; ++j) {
      const double d = hr(i, j) - mean;
      var += d * d;
    }
  return var / 2500.0;
}

SyntheticStack synthesize_stack(const Image& truth_hr, const SimSpec& spec) {
  if (spec.n_exposures < 1) throw input_error("synthesize_stack: n_exposures < 1");
  if (spec.d < 1) throw input_error("synthesize_stack: d < 1");
  if (!std::isfinite(spec.snr_db)) throw input_error("synthesize_stack: snr not finite");
  if (truth_hr.height() % spec.d != 0 || truth_hr.width() % spec.d != 0)
    throw input_error("synthesize_stack: truth dims not divisible by d");

  SyntheticStack out;
  out.truth = truth_hr;
  out.signal_level = snr_signal_level(truth_hr);
  out.noise_sigma = std::sqrt(out.signal_level / std::pow(10.0, spec.snr_db / 10.0));

  if (!spec.fixed_shifts.empty() &&
      spec.fixed_shifts.size() != std::size_t(spec.n_exposures))
    throw input_error("synthesize_stack: fixed_shifts count mismatch");
  GaussianSampler shift_rng(derive_seed(spec.seed, 0xdeed));
  auto uniform_half = [&shift_rng]() { return shift_rng.uniform01() - 0.5; };

  out.stack.upsampling = spec.d;
  for (int k = 0; k < spec.n_exposures; ++k) {
    LRExposure exp;
    exp.shift = spec.fixed_shifts.empty() ? std::array{uniform_half(), uniform_half()}
                                          : spec.fixed_shifts[k];
    out.shifts.push_back(exp.shift);
    double flux = spec.flux_range[0];
    if (spec.flux_range[1] > spec.flux_range[0])
      flux = shift_rng.uniform(spec.flux_range[0], spec.flux_range[1]);
    out.fluxes.push_back(flux);

    Image clean = predict_exposure(truth_hr, exp.shift, spec.d);
    if (flux != 1.0)
      for (double& v : clean.pixels()) v *= flux;
    if (out.noise_sigma > 0) {
      GaussianSampler noise_rng(derive_seed(spec.seed, 0xb0b + k));
      for (double& v : clean.pixels()) v += out.noise_sigma * noise_rng.next();
    }
    exp.image = std::move(clean);
    exp.sigma = std::max(out.noise_sigma, 1e-12);
    exp.flux = flux;
    out.stack.exposures.push_back(std::move(exp));
  }

  out.rel_shifts.resize(spec.n_exposures);
  for (int k = 0; k < spec.n_exposures; ++k)
    out.rel_shifts[k] = {out.shifts[k][0] - out.shifts[0][0],
                         out.shifts[k][1] - out.shifts[0][1]};

  // reconstruction lives in exposure 0's frame: register the truth to it
  const auto& s0 = out.shifts[0];
  if (s0[0] == 0.0 && s0[1] == 0.0) {
    out.truth_ref = truth_hr;
  } else {
    out.truth_ref = predict_exposure(
        truth_hr, {double(spec.d) * s0[0], double(spec.d) * s0[1]}, 1);
  }
  return out;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::shift_add: return "shift-and-add";
    case Method::quadratic: return "quadratic-baseline";
    case Method::sprite_starlet2: return "sprite-starlet2";
    case Method::sprite_bior79: return "sprite-bior79";
    case Method::sprite_no_positivity: return "sprite-no-positivity";
    case Method::sprite_k1: return "sprite-K1";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  for (Method m : {Method::shift_add, Method::quadratic, Method::sprite_starlet2,
                   Method::sprite_bior79, Method::sprite_no_positivity,
                   Method::sprite_k1})
    if (method_name(m) == name) return m;
  throw input_error("unknown method: " + name);
}

PsfParams draw_psf_params(PsfKind kind, std::uint64_t seed) {
  GaussianSampler rng(seed);
  PsfParams p;
  if (kind == PsfKind::elliptical_gaussian) {
    const double size = rng.uniform(1.6, 2.6);
    const double q = rng.uniform(0.7, 1.0);
    p.sigma_x = size;
    p.sigma_y = size * q;
    p.theta = rng.uniform(0.0, std::numbers::pi);
  } else {
    p.airy_first_null = rng.uniform(3.5, 5.0);
    p.obscuration = rng.uniform(0.2, 0.35);
  }
  return p;
}

namespace {

struct TrialScore {
  double e1_err, e2_err, fwhm_err_pct, errmap_std, pearson;
};

TrialScore score_reconstruction(const Image& truth_ref, const Image& recon,
                                double weight_sigma) {
  TrialScore s{};
  const Moments mt = weighted_moments(truth_ref, weight_sigma);
  const Moments mr = weighted_moments(recon, weight_sigma);
  const auto [t1, t2] = ellipticity(mt);
  const auto [r1, r2] = ellipticity(mr);
  s.e1_err = std::abs(t1 - r1);
  s.e2_err = std::abs(t2 - r2);
  const double ft = fwhm_lorentzian(truth_ref);
  const double fr = fwhm_lorentzian(recon);
  s.fwhm_err_pct = 100.0 * std::abs(fr - ft) / ft;
  s.errmap_std = error_map_stats(truth_ref, recon).second;
  s.pearson = pearson_correlation(truth_ref, recon);
  return s;
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / double(v.size()));
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkSpec& spec) {
  if (spec.trials < 1) throw input_error("run_benchmark: trials < 1");
  if (spec.snrs_db.empty() || spec.methods.empty())
    throw input_error("run_benchmark: empty grid");

  const std::size_t n_cells = spec.snrs_db.size() * std::size_t(spec.trials);
  const std::size_t n_methods = spec.methods.size();
  BenchmarkResult result;
  result.rows.resize(n_cells * n_methods);
  result.cells = int(result.rows.size());

  auto run_cell = [&](std::size_t cell) {
    const std::size_t si = cell / std::size_t(spec.trials);
    const int trial = int(cell % std::size_t(spec.trials));
    const std::uint64_t cell_seed =
        derive_seed(spec.seed, si * 1000003ull + std::uint64_t(trial));
    SimSpec sim;
    sim.kind = spec.kind;
    if (spec.randomize_psf) sim.params = draw_psf_params(spec.kind, cell_seed);
    sim.n_exposures = spec.n_exposures;
    sim.d = spec.d;
    sim.snr_db = spec.snrs_db[si];
    sim.seed = derive_seed(cell_seed, 7);

    const int hr = spec.lr_size * spec.d;
    const Image truth = make_psf(sim.kind, sim.params, hr, hr);
    const SyntheticStack synth = synthesize_stack(truth, sim);

    // sprite runs share one solve per cell (K1 is the first pass of K2)
    SpriteResult sprite_cache;
    bool sprite_cached = false;

    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      const Method m = spec.methods[mi];
      BenchmarkRow row;
      row.snr_db = spec.snrs_db[si];
      row.method = m;
      row.trial = trial;
      const auto tic = std::chrono::steady_clock::now();
      try {
        Image recon;
        switch (m) {
          case Method::shift_add: {
            const EstimationReport rep = estimate_stack(synth.stack);
            recon = shift_and_add(apply_report(synth.stack, rep));
            break;
          }
          case Method::quadratic: {
            const EstimationReport rep = estimate_stack(synth.stack);
            recon = quadratic_baseline(apply_report(synth.stack, rep),
                                       spec.quad_reg_lambda,
                                       spec.solver.conv_path)
                        .solution;
            break;
          }
          case Method::sprite_starlet2:
          case Method::sprite_k1: {
            if (!sprite_cached) {
              SolverConfig cfg = spec.solver;
              cfg.dict = Dictionary::starlet2;
              cfg.seed = cell_seed;
              sprite_cache = sprite_reconstruct(synth.stack, cfg);
              sprite_cached = true;
            }
            recon = m == Method::sprite_k1 ? sprite_cache.per_pass.front()
                                           : sprite_cache.solution;
            break;
          }
          case Method::sprite_bior79: {
            SolverConfig cfg = spec.solver;
            cfg.dict = Dictionary::bior79;
            cfg.seed = cell_seed;
            recon = sprite_reconstruct(synth.stack, cfg).solution;
            break;
          }
          case Method::sprite_no_positivity: {
            SolverConfig cfg = spec.solver;
            cfg.dict = Dictionary::starlet2;
            cfg.positivity = false;
            cfg.seed = cell_seed;
            recon = sprite_reconstruct(synth.stack, cfg).solution;
            break;
          }
        }
        const TrialScore sc = score_reconstruction(synth.truth_ref, recon,
                                                   spec.metric_weight_sigma);
        row.e1_err = sc.e1_err;
        row.e2_err = sc.e2_err;
        row.fwhm_err_pct = sc.fwhm_err_pct;
        row.errmap_std = sc.errmap_std;
        row.pearson = sc.pearson;
        row.ok = true;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
      row.runtime_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - tic)
              .count();
      result.rows[cell * n_methods + mi] = std::move(row);
    }
  };

  const int jobs = std::max(1, std::min<int>(spec.jobs, int(n_cells)));
  if (jobs == 1) {
    for (std::size_t cell = 0; cell < n_cells; ++cell) run_cell(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (std::size_t cell = next.fetch_add(1); cell < n_cells;
             cell = next.fetch_add(1))
          run_cell(cell);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& row : result.rows)
    if (!row.ok) ++result.failures;

  // aggregate per (snr, method)
  for (double snr : spec.snrs_db) {
    for (Method m : spec.methods) {
      std::vector<double> e1, e2, fw, em, pe, rt;
      for (const auto& row : result.rows) {
        if (row.snr_db != snr || row.method != m || !row.ok) continue;
        e1.push_back(row.e1_err);
        e2.push_back(row.e2_err);
        fw.push_back(row.fwhm_err_pct);
        em.push_back(row.errmap_std);
        pe.push_back(row.pearson);
        rt.push_back(row.runtime_s);
      }
      BenchmarkAggregate agg;
      agg.snr_db = snr;
      agg.method = m;
      agg.count = int(e1.size());
      if (!e1.empty()) {
        auto mean = [](const std::vector<double>& v) {
          double s = 0;
          for (double x : v) s += x;
          return s / double(v.size());
        };
        agg.e1_err_mean = mean(e1);
        agg.e1_err_std = sample_std(e1, agg.e1_err_mean);
        agg.e2_err_mean = mean(e2);
        agg.e2_err_std = sample_std(e2, agg.e2_err_mean);
        agg.fwhm_err_pct_mean = mean(fw);
        agg.fwhm_err_pct_std = sample_std(fw, agg.fwhm_err_pct_mean);
        agg.errmap_std_mean = mean(em);
        agg.errmap_std_std = sample_std(em, agg.errmap_std_mean);
        agg.pearson_mean = mean(pe);
        agg.pearson_std = sample_std(pe, agg.pearson_mean);
        agg.runtime_s_mean = mean(rt);
      }
      result.aggregates.push_back(agg);
    }
  }
  return result;
}

}  // namespace sprite

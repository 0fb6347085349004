// Acceptance suite: runs every quantitative contract end to end and prints
// one PASS/FAIL line per criterion. Exit code is the number of failures.

#include <sys/resource.h>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "sprite/estimation.hpp"
#include "sprite/linalg.hpp"
#include "sprite/metrics.hpp"
#include "sprite/observation.hpp"
#include "sprite/simulation.hpp"
#include "sprite/solvers.hpp"
#include "sprite/wavelets.hpp"

using namespace sprite;
using namespace sprite::testing;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail, double seconds) {
  std::printf("[%s] criterion %2d: %s (%s; %.1f s)\n", pass ? "PASS" : "FAIL",
              criterion, what.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

LRStack random_stack(int p, int d, int n, std::uint64_t seed) {
  GaussianSampler rng(seed);
  LRStack stack;
  stack.upsampling = d;
  for (int k = 0; k < n; ++k) {
    LRExposure e;
    e.image = random_image(p, p, seed + 7 * k + 1);
    e.sigma = rng.uniform(0.5, 2.0);
    e.flux = rng.uniform(0.5, 1.5);
    e.shift = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    stack.exposures.push_back(std::move(e));
  }
  return stack;
}

// ---- criterion 1: operator correctness ------------------------------------
void criterion_1() {
  const auto t0 = clock_type::now();
  bool pass = true;
  std::string detail;

  for (int d : {1, 2, 3}) {
    const int p = 6;
    LRStack stack = random_stack(p, d, 4, 11 * d);
    ObservationOperator op(stack);
    GaussianSampler rng(17 + d);
    for (int rep = 0; rep < 100; ++rep) {
      const Image x = random_image(d * p, d * p, 1000 * d + rep);
      std::vector<double> y(op.data_size());
      rng.fill(y);
      const double lhs = dot(op.forward(x), y);
      const double rhs = dot(flatten(x), flatten(op.adjoint(y)));
      if (std::abs(lhs - rhs) > 1e-10 * norm2(flatten(x)) * norm2(y)) {
        pass = false;
        detail = "adjoint identity failed at d=" + std::to_string(d);
      }
    }
  }

  // dense oracle on 16x16 HR grids
  for (int d : {1, 2}) {
    const int p = 16 / d;
    LRStack stack = random_stack(p, d, 3, 100 + d);
    ObservationOperator op(stack);
    auto fwd = [&op](const std::vector<double>& v) {
      return op.forward(unflatten(v, 16, 16));
    };
    const Eigen::MatrixXd m = dense_of(fwd, 256, op.data_size());
    const Image x = random_image(16, 16, 5 + d);
    const auto got = op.forward(x);
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), 256);
    const Eigen::VectorXd want = m * xv;
    for (std::size_t k = 0; k < got.size(); ++k)
      if (std::abs(got[k] - want[long(k)]) > 1e-10) pass = false;
    std::vector<double> r(op.data_size());
    GaussianSampler rng(3);
    rng.fill(r);
    const Image back = op.adjoint(r);
    Eigen::Map<const Eigen::VectorXd> rv(r.data(), long(r.size()));
    const Eigen::VectorXd wantb = m.transpose() * rv;
    for (int k = 0; k < 256; ++k)
      if (std::abs(back[std::size_t(k)] - wantb[k]) > 1e-10) pass = false;
    if (!pass && detail.empty()) detail = "dense oracle mismatch";
  }

  const double secs = seconds_since(t0);
  if (secs >= 10.0) {
    pass = false;
    detail += " runtime over 10 s";
  }
  if (detail.empty()) detail = "adjoint + dense oracle at 1e-10";
  report(1, pass, "observation operator correctness", detail, secs);
}

// ---- criterion 2: wavelet exactness ----------------------------------------
void criterion_2() {
  const auto t0 = clock_type::now();
  bool pass = true;
  double worst_pr = 0.0, worst_adj = 0.0;
  for (Dictionary dict : {Dictionary::starlet2, Dictionary::bior79}) {
    WaveletTransform wt(64, 64, dict, 4);
    GaussianSampler rng(23);
    for (int rep = 0; rep < 200; ++rep) {
      const Image x = random_image(64, 64, 40000 + rep + (dict == Dictionary::bior79 ? 1 << 20 : 0));
      const Image back = wt.reconstruct(wt.analyze(x));
      double xmax = 0;
      for (double v : x.pixels()) xmax = std::max(xmax, std::abs(v));
      worst_pr = std::max(worst_pr, max_abs_diff(x, back) / xmax);

      std::vector<double> u(wt.coeff_size());
      rng.fill(u);
      std::vector<double> cx;
      wt.analyze_into(x, cx);
      Image bu;
      wt.adjoint_into(u, bu);
      const double lhs = dot(cx, u);
      const double rhs = dot(flatten(x), flatten(bu));
      worst_adj = std::max(worst_adj, std::abs(lhs - rhs) /
                                          (norm2(flatten(x)) * norm2(u)));
    }
  }
  pass = worst_pr < 1e-10 && worst_adj < 1e-10;
  const double secs = seconds_since(t0);
  if (secs >= 30.0) pass = false;
  char buf[160];
  std::snprintf(buf, sizeof buf, "max PR err %.2e, max adjoint err %.2e",
                worst_pr, worst_adj);
  report(2, pass, "wavelet exact reconstruction and adjoint", buf, secs);
}

// ---- criterion 3: shift-and-add exact recovery ------------------------------
void criterion_3() {
  const auto t0 = clock_type::now();
  const Image truth = make_psf(PsfKind::elliptical_gaussian,
                               {.sigma_x = 2.3, .sigma_y = 1.8, .theta = 0.5},
                               168, 168);
  LRStack stack;
  stack.upsampling = 2;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      LRExposure e;
      e.image = Image(84, 84);
      for (int i = 0; i < 84; ++i)
        for (int j = 0; j < 84; ++j) e.image(i, j) = truth(2 * i + a, 2 * j + b);
      e.shift = {-a / 2.0, -b / 2.0};
      stack.exposures.push_back(std::move(e));
    }
  const Image rec = shift_and_add(stack);
  const double err = max_abs_diff(rec, truth);
  const double secs = seconds_since(t0);
  char buf[80];
  std::snprintf(buf, sizeof buf, "max abs error %.2e", err);
  report(3, err < 1e-10 && secs < 5.0, "shift-and-add exact phase recovery", buf,
         secs);
}

// ---- criterion 4: noise-free full-pipeline consistency ----------------------
void criterion_4() {
  const auto t0 = clock_type::now();
  const Image truth = make_psf(PsfKind::elliptical_gaussian,
                               {.sigma_x = 2.0, .sigma_y = 1.6, .theta = 0.9},
                               168, 168);
  SimSpec spec;
  spec.snr_db = 400.0;  // effectively noise-free
  spec.seed = 12345;
  const SyntheticStack synth = synthesize_stack(truth, spec);
  SolverConfig cfg;
  const SpriteResult res = sprite_reconstruct(synth.stack, cfg);
  const double err = rel_l2_error(synth.truth_ref, res.solution);
  const double secs = seconds_since(t0);
  char buf[80];
  std::snprintf(buf, sizeof buf, "relative l2 error %.4f%%", 100.0 * err);
  report(4, err < 0.01 && secs < 120.0, "noise-free reconstruction consistency",
         buf, secs);
}

// ---- criteria 5-9: the Monte-Carlo grid -------------------------------------
struct TrialResult {
  bool ok = false;
  double sprite_e1 = 0, sprite_e2 = 0, sprite_fwhm_pct = 0, sprite_errmap = 0;
  double sprite_min_pixel = 0, sprite_peak = 0;
  double k1_pearson = 0, k2_pearson = 0;
  double saa_errmap = 0;
  double quad_e1 = 0, quad_e2 = 0, quad_fwhm_pct = 0;
  double nopos_e1 = 0, nopos_e2 = 0;
};

TrialResult run_trial(double snr_db, int trial, bool with_nopos) {
  TrialResult out;
  const std::uint64_t cell_seed =
      derive_seed(0xacce97, std::uint64_t(snr_db * 100) * 131071 + trial);
  const PsfParams params = draw_psf_params(PsfKind::elliptical_gaussian, cell_seed);
  const Image truth = make_psf(PsfKind::elliptical_gaussian, params, 168, 168);
  SimSpec spec;
  spec.params = params;
  spec.snr_db = snr_db;
  spec.seed = derive_seed(cell_seed, 3);
  const SyntheticStack synth = synthesize_stack(truth, spec);
  const double wsigma = 7.5;

  const auto [te1, te2] = ellipticity(weighted_moments(synth.truth_ref, wsigma));
  const double tfwhm = fwhm_lorentzian(synth.truth_ref);

  SolverConfig cfg;
  cfg.seed = cell_seed;
  const SpriteResult sp = sprite_reconstruct(synth.stack, cfg);
  {
    const auto [e1, e2] = ellipticity(weighted_moments(sp.solution, wsigma));
    out.sprite_e1 = std::abs(e1 - te1);
    out.sprite_e2 = std::abs(e2 - te2);
    out.sprite_fwhm_pct =
        100.0 * std::abs(fwhm_lorentzian(sp.solution) - tfwhm) / tfwhm;
    out.sprite_errmap = error_map_stats(synth.truth_ref, sp.solution).second;
    out.sprite_min_pixel = sp.solution.min_value();
    out.sprite_peak = sp.solution.max_value();
    out.k1_pearson = pearson_correlation(synth.truth_ref, sp.per_pass[0]);
    out.k2_pearson = pearson_correlation(synth.truth_ref, sp.per_pass[1]);
  }

  const EstimationReport rep = estimate_stack(synth.stack);
  const LRStack reg = apply_report(synth.stack, rep);
  out.saa_errmap =
      error_map_stats(synth.truth_ref, shift_and_add(reg)).second;

  const Image quad = quadratic_baseline(reg, 1.0).solution;
  {
    const auto [e1, e2] = ellipticity(weighted_moments(quad, wsigma));
    out.quad_e1 = std::abs(e1 - te1);
    out.quad_e2 = std::abs(e2 - te2);
    out.quad_fwhm_pct = 100.0 * std::abs(fwhm_lorentzian(quad) - tfwhm) / tfwhm;
  }

  if (with_nopos) {
    SolverConfig nc = cfg;
    nc.positivity = false;
    const Image nopos = sprite_reconstruct(synth.stack, nc).solution;
    const auto [e1, e2] = ellipticity(weighted_moments(nopos, wsigma));
    out.nopos_e1 = std::abs(e1 - te1);
    out.nopos_e2 = std::abs(e2 - te2);
  }
  out.ok = true;
  return out;
}

void criteria_5_to_9() {
  const std::vector<double> snrs = {10, 15, 20, 25, 30};
  const int trials = 20;
  std::vector<std::vector<TrialResult>> grid(snrs.size());

  const auto t0 = clock_type::now();
  for (std::size_t si = 0; si < snrs.size(); ++si) {
    for (int t = 0; t < trials; ++t) {
      try {
        grid[si].push_back(run_trial(snrs[si], t, snrs[si] == 15.0));
      } catch (const std::exception& e) {
        TrialResult bad;
        bad.ok = false;
        grid[si].push_back(bad);
        std::fprintf(stderr, "trial snr=%g #%d failed: %s\n", snrs[si], t,
                     e.what());
      }
    }
  }
  const double grid_secs = seconds_since(t0);

  auto collect = [&](double snr, auto getter) {
    std::vector<double> vals;
    for (std::size_t si = 0; si < snrs.size(); ++si)
      if (snrs[si] == snr)
        for (const auto& tr : grid[si])
          if (tr.ok) vals.push_back(getter(tr));
    return vals;
  };

  // criterion 5: error-map improvement at 30 dB
  {
    const auto sp = collect(30, [](const TrialResult& t) { return t.sprite_errmap; });
    const auto sa = collect(30, [](const TrialResult& t) { return t.saa_errmap; });
    const double ratio = median_of(sp) / median_of(sa);
    char buf[120];
    std::snprintf(buf, sizeof buf,
                  "median errmap std ratio sprite/shift-and-add = %.3f", ratio);
    report(5, ratio <= 0.85 && !sp.empty(), "error-map improvement at 30 dB", buf,
           grid_secs);
  }

  // criterion 6: ellipticity at 10 dB against the quadratic baseline
  {
    const auto s1 = collect(10, [](const TrialResult& t) { return t.sprite_e1; });
    const auto s2 = collect(10, [](const TrialResult& t) { return t.sprite_e2; });
    const auto q1 = collect(10, [](const TrialResult& t) { return t.quad_e1; });
    const auto q2 = collect(10, [](const TrialResult& t) { return t.quad_e2; });
    const double r1 = median_of(s1) / median_of(q1);
    const double r2 = median_of(s2) / median_of(q2);
    char buf[120];
    std::snprintf(buf, sizeof buf, "median E1 ratio %.3f, E2 ratio %.3f", r1, r2);
    report(6, r1 <= 0.5 && r2 <= 0.5, "low-SNR ellipticity vs quadratic baseline",
           buf, grid_secs);
  }

  // criterion 7: FWHM accuracy at 20-30 dB
  {
    bool pass = true;
    std::string detail;
    for (double snr : {20.0, 25.0, 30.0}) {
      const auto sf =
          collect(snr, [](const TrialResult& t) { return t.sprite_fwhm_pct; });
      const auto qf =
          collect(snr, [](const TrialResult& t) { return t.quad_fwhm_pct; });
      double smean = 0, qmean = 0;
      for (double v : sf) smean += v;
      for (double v : qf) qmean += v;
      smean /= double(sf.size());
      qmean /= double(qf.size());
      char buf[80];
      std::snprintf(buf, sizeof buf, "%gdB: %.2f%% (quad %.2f%%) ", snr, smean,
                    qmean);
      detail += buf;
      if (smean > 10.0 || smean > qmean) pass = false;
    }
    report(7, pass, "FWHM error envelope", detail, grid_secs);
  }

  // criterion 8: positivity ablation at 15 dB
  {
    const auto pe1 = collect(15, [](const TrialResult& t) { return t.sprite_e1; });
    const auto pe2 = collect(15, [](const TrialResult& t) { return t.sprite_e2; });
    const auto ne1 = collect(15, [](const TrialResult& t) { return t.nopos_e1; });
    const auto ne2 = collect(15, [](const TrialResult& t) { return t.nopos_e2; });
    bool min_ok = true;
    for (const auto& tr : grid[1])
      if (tr.ok && tr.sprite_min_pixel < -1e-9 * tr.sprite_peak) min_ok = false;
    const bool med_ok = median_of(pe1) <= median_of(ne1) &&
                        median_of(pe2) <= median_of(ne2);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "median e1 %.4f<=%.4f, e2 %.4f<=%.4f, min pixel ok=%d",
                  median_of(pe1), median_of(ne1), median_of(pe2), median_of(ne2),
                  int(min_ok));
    report(8, med_ok && min_ok, "positivity ablation at 15 dB", buf, grid_secs);
  }

  // criterion 9: reweighting ablation across the grid
  {
    bool pass = true;
    std::string detail;
    for (std::size_t si = 0; si < snrs.size(); ++si) {
      std::vector<double> k1, k2;
      for (const auto& tr : grid[si])
        if (tr.ok) {
          k1.push_back(tr.k1_pearson);
          k2.push_back(tr.k2_pearson);
        }
      const double m1 = median_of(k1), m2 = median_of(k2);
      char buf[80];
      std::snprintf(buf, sizeof buf, "%gdB: %.5f vs %.5f ", snrs[si], m2, m1);
      detail += buf;
      if (m2 < m1) pass = false;
    }
    report(9, pass, "reweighting keeps or improves correlation", detail,
           grid_secs);
  }
}

// ---- criterion 10: performance envelope -------------------------------------
void criterion_10() {
  const Image truth = make_psf(PsfKind::elliptical_gaussian,
                               {.sigma_x = 2.1, .sigma_y = 1.9, .theta = 0.3},
                               168, 168);
  SimSpec spec;
  spec.snr_db = 30;
  spec.seed = 4242;
  const SyntheticStack synth = synthesize_stack(truth, spec);
  const auto t0 = clock_type::now();
  SolverConfig cfg;
  const SpriteResult res = sprite_reconstruct(synth.stack, cfg);
  const double secs = seconds_since(t0);
  struct rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  const double rss_gb = double(usage.ru_maxrss) / (1024.0 * 1024.0);
  char buf[120];
  std::snprintf(buf, sizeof buf, "%.1f s, peak RSS %.2f GB, %d iterations", secs,
                rss_gb, res.diag.iterations);
  report(10, secs <= 60.0 && rss_gb <= 1.0, "single-reconstruction envelope", buf,
         secs);
}

// ---- criterion 11: weight-update law ----------------------------------------
void criterion_11() {
  const auto t0 = clock_type::now();
  bool pass = reweight_value(0.0, 1.0) == 1.0 &&
              reweight_value(3.0, 1.0) == 0.5 &&
              reweight_value(3.0e6, 1.0e6) == 0.5;
  double prev = 2.0;
  for (double a = 0.0; a <= 30.0; a += 0.25) {
    const double w = reweight_value(a, 2.0);
    if (w > prev) pass = false;
    prev = w;
  }
  report(11, pass, "weight-update unit law", "w(0)=1, w(3s)=1/2, decreasing",
         seconds_since(t0));
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criteria_5_to_9();
  criterion_10();
  criterion_11();
  if (g_failures == 0)
    std::printf("all criteria passed\n");
  else
    std::printf("%d criteria FAILED\n", g_failures);
  return g_failures;
}

#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sprite/errors.hpp"
#include "sprite/metrics.hpp"
#include "sprite/simulation.hpp"

using namespace sprite;
using namespace sprite::testing;

namespace {

Image elliptical_gaussian(int n, double sx, double sy, double theta) {
  PsfParams p;
  p.sigma_x = sx;
  p.sigma_y = sy;
  p.theta = theta;
  return make_psf(PsfKind::elliptical_gaussian, p, n, n);
}

Image transpose_image(const Image& in) {
  Image out(in.width(), in.height());
  for (int i = 0; i < in.height(); ++i)
    for (int j = 0; j < in.width(); ++j) out(j, i) = in(i, j);
  return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("moments of symmetric and elongated gaussians") {
  const Image round = elliptical_gaussian(84, 4.0, 4.0, 0.0);
  const Moments mr = weighted_moments(round, 10.0);
  CHECK(mr.mu20 == doctest::Approx(mr.mu02).epsilon(1e-6));
  CHECK(std::abs(mr.mu11) < 1e-8);

  // sigma_x = 2 sigma_y, uniform weights: moment ratio 4
  const Image elong = elliptical_gaussian(84, 6.0, 3.0, 0.0);
  const Moments me = weighted_moments(elong, 0.0);
  CHECK(me.mu20 / me.mu02 == doctest::Approx(4.0).epsilon(0.01));

  // rotating the image by 90 degrees swaps the moments
  const Moments mt = weighted_moments(transpose_image(elong), 0.0);
  CHECK(mt.mu20 == doctest::Approx(me.mu02).epsilon(1e-9));
  CHECK(mt.mu02 == doctest::Approx(me.mu20).epsilon(1e-9));
}

TEST_CASE("ellipticity values and transformation rules") {
  const Image round = elliptical_gaussian(84, 4.0, 4.0, 0.0);
  const auto [c1, c2] = ellipticity(weighted_moments(round, 0.0));
  CHECK(std::abs(c1) < 1e-6);
  CHECK(std::abs(c2) < 1e-6);

  const Image elong = elliptical_gaussian(84, 6.0, 3.0, 0.0);
  const auto [e1, e2] = ellipticity(weighted_moments(elong, 0.0));
  CHECK(e1 == doctest::Approx(0.6).epsilon(0.01));
  CHECK(std::abs(e2) < 0.01);

  // rotation by 45 degrees moves e1 into e2 (ellipticity rotates by 2 theta)
  const Image rot = elliptical_gaussian(84, 6.0, 3.0, std::numbers::pi / 4);
  const auto [r1, r2] = ellipticity(weighted_moments(rot, 0.0));
  CHECK(std::abs(r1) < 0.01);
  CHECK(r2 == doctest::Approx(0.6).epsilon(0.02));

  // rotation by 90 degrees flips the sign of e1
  const Image rot90 = elliptical_gaussian(84, 6.0, 3.0, std::numbers::pi / 2);
  const auto [n1, n2] = ellipticity(weighted_moments(rot90, 0.0));
  CHECK(n1 == doctest::Approx(-0.6).epsilon(0.01));
  CHECK(std::abs(n2) < 0.01);
}

TEST_CASE("ellipticity is invariant under positive scaling") {
  const Image base = elliptical_gaussian(64, 5.0, 3.5, 0.7);
  Image scaled = base;
  for (double& v : scaled.pixels()) v *= 37.0;
  const auto [e1, e2] = ellipticity(weighted_moments(base, 8.0));
  const auto [s1, s2] = ellipticity(weighted_moments(scaled, 8.0));
  CHECK(e1 == doctest::Approx(s1).epsilon(1e-12));
  CHECK(e2 == doctest::Approx(s2).epsilon(1e-12));
}

TEST_CASE("moment errors") {
  Image zeros(16, 16);
  CHECK_THROWS_AS(weighted_moments(zeros, 3.0), estimation_error);
  Moments degenerate;
  CHECK_THROWS_AS(ellipticity(degenerate), estimation_error);
}

TEST_CASE("fwhm of a gaussian profile") {
  const Image g = gaussian_blob(84, 84, 41.5, 41.5, 3.0);
  const double fwhm = fwhm_lorentzian(g);
  CHECK(fwhm == doctest::Approx(2.3548 * 3.0).epsilon(0.03));

  // amplitude invariance
  Image scaled = g;
  for (double& v : scaled.pixels()) v *= 10.0;
  CHECK(fwhm_lorentzian(scaled) == doctest::Approx(fwhm).epsilon(1e-6));

  // integer translation invariance
  const Image moved = gaussian_blob(84, 84, 44.5, 39.5, 3.0);
  CHECK(fwhm_lorentzian(moved) == doctest::Approx(fwhm).epsilon(1e-3));

  // twice finer sampling doubles the width in pixel units
  const Image fine = gaussian_blob(168, 168, 83.5, 83.5, 6.0);
  CHECK(fwhm_lorentzian(fine) == doctest::Approx(2.0 * fwhm).epsilon(0.02));
}

TEST_CASE("mean absolute ellipticity error") {
  using pairs = std::vector<std::pair<double, double>>;
  const pairs t{{0.1, 0.0}, {0.2, 0.1}};
  auto same = mean_abs_ellipticity_error(t, t);
  CHECK(same.e1_mean == 0.0);
  CHECK(same.e2_mean == 0.0);
  CHECK(same.e1_std == 0.0);
  CHECK(same.e2_std == 0.0);

  auto single = mean_abs_ellipticity_error({{0.2, 0.0}}, {{0.1, 0.0}});
  CHECK(single.e1_mean == doctest::Approx(0.1));
  CHECK(single.e1_std == 0.0);

  auto two = mean_abs_ellipticity_error({{0.1, 0.0}, {0.3, 0.0}},
                                        {{0.0, 0.0}, {0.0, 0.0}});
  CHECK(two.e1_mean == doctest::Approx(0.2));

  CHECK_THROWS_AS(mean_abs_ellipticity_error(t, pairs{{0.0, 0.0}}), input_error);
}

TEST_CASE("pearson correlation") {
  const Image a = random_image(24, 24, 5);
  CHECK(pearson_correlation(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  Image neg = a, affine = a;
  for (double& v : neg.pixels()) v = -v;
  for (double& v : affine.pixels()) v = 2.0 * v + 3.0;
  CHECK(pearson_correlation(a, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(pearson_correlation(a, affine) == doctest::Approx(1.0).epsilon(1e-12));

  Image constant(24, 24);
  for (double& v : constant.pixels()) v = 2.0;
  CHECK_THROWS_AS(pearson_correlation(a, constant), input_error);
}

TEST_CASE("error map statistics") {
  const Image truth = gaussian_blob(84, 84, 41.5, 41.5, 4.0);
  auto [zero_map, zero_std] = error_map_stats(truth, truth);
  CHECK(zero_std == 0.0);
  CHECK(zero_map.max_value() == 0.0);

  Image offset = truth;
  for (double& v : offset.pixels()) v += 0.25;
  auto [cmap, cstd] = error_map_stats(truth, offset);
  CHECK(cstd == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cmap(0, 0) == doctest::Approx(0.25));

  // recon = truth + unit noise: folded-normal std
  Image noisy = truth;
  GaussianSampler rng(17);
  for (double& v : noisy.pixels()) v += rng.next();
  auto [nmap, nstd] = error_map_stats(truth, noisy);
  CHECK(nstd == doctest::Approx(0.6028).epsilon(0.03));
}

}  // TEST_SUITE

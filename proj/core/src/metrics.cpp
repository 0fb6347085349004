#include "sprite/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sprite/errors.hpp"

namespace sprite {

namespace {

struct MomentPass {
  double flux, ci, cj, mu_rr, mu_cc, mu_rc;
};

MomentPass moments_once(const Image& img, double ci, double cj, double inv2s2) {
  MomentPass m{0, 0, 0, 0, 0, 0};
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j) {
      const double di = i - ci, dj = j - cj;
      const double f =
          inv2s2 > 0 ? std::exp(-(di * di + dj * dj) * inv2s2) : 1.0;
      const double wv = f * img(i, j);
      m.flux += wv;
      m.ci += wv * i;
      m.cj += wv * j;
    }
  if (m.flux <= 0) return m;
  m.ci /= m.flux;
  m.cj /= m.flux;
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j) {
      const double di = i - ci, dj = j - cj;
      const double f =
          inv2s2 > 0 ? std::exp(-(di * di + dj * dj) * inv2s2) : 1.0;
      const double wv = f * img(i, j);
      const double ri = i - m.ci, rj = j - m.cj;
      m.mu_rr += wv * ri * ri;
      m.mu_cc += wv * rj * rj;
      m.mu_rc += wv * ri * rj;
    }
  m.mu_rr /= m.flux;
  m.mu_cc /= m.flux;
  m.mu_rc /= m.flux;
  return m;
}

}  // namespace

Moments weighted_moments(const Image& image, double weight_sigma) {
  const bool uniform = !(weight_sigma > 0) || !std::isfinite(weight_sigma);
  const double inv2s2 = uniform ? 0.0 : 1.0 / (2.0 * weight_sigma * weight_sigma);

  // start the window on the plain flux centroid
  double ci = 0, cj = 0, flux = 0;
  for (int i = 0; i < image.height(); ++i)
    for (int j = 0; j < image.width(); ++j) {
      const double v = std::max(image(i, j), 0.0);
      flux += v;
      ci += v * i;
      cj += v * j;
    }
  if (flux <= 0) throw estimation_error("weighted_moments: non-positive flux");
  ci /= flux;
  cj /= flux;

  MomentPass m{};
  for (int pass = 0; pass < 20; ++pass) {
    m = moments_once(image, ci, cj, inv2s2);
    if (m.flux <= 0)
      throw estimation_error("weighted_moments: non-positive weighted flux");
    const double move = std::hypot(m.ci - ci, m.cj - cj);
    ci = m.ci;
    cj = m.cj;
    if (uniform || move < 1e-8) break;
  }
  Moments out;
  out.centroid = {ci, cj};
  out.weighted_flux = m.flux;
  out.mu20 = m.mu_cc;  // x-axis = columns
  out.mu02 = m.mu_rr;
  out.mu11 = m.mu_rc;
  return out;
}

std::pair<double, double> ellipticity(const Moments& m) {
  const double denom = m.mu20 + m.mu02;
  if (denom <= 0) throw estimation_error("ellipticity: mu20 + mu02 <= 0");
  return {(m.mu20 - m.mu02) / denom, 2.0 * m.mu11 / denom};
}

namespace {

// Modified Lorentzian surface m = A / (1 + u^p) with
// u = (x''/wx)^2 + (y''/wy)^2 in rotated frame coordinates.
struct LorentzParams {
  double amp, xc, yc, wx, wy, theta, p;
};

double lorentz_model(const LorentzParams& q, double x, double y) {
  const double c = std::cos(q.theta), s = std::sin(q.theta);
  const double dx = x - q.xc, dy = y - q.yc;
  const double xr = c * dx + s * dy, yr = -s * dx + c * dy;
  const double u = (xr * xr) / (q.wx * q.wx) + (yr * yr) / (q.wy * q.wy);
  return q.amp / (1.0 + std::pow(u, q.p));
}

void lorentz_jacobian(const LorentzParams& q, double x, double y, double* row) {
  const double c = std::cos(q.theta), s = std::sin(q.theta);
  const double dx = x - q.xc, dy = y - q.yc;
  const double xr = c * dx + s * dy, yr = -s * dx + c * dy;
  const double u = std::max((xr * xr) / (q.wx * q.wx) + (yr * yr) / (q.wy * q.wy),
                            1e-12);
  const double up = std::pow(u, q.p);
  const double g = 1.0 / (1.0 + up);
  const double dm_du = -q.amp * q.p * std::pow(u, q.p - 1.0) * g * g;
  const double du_dxr = 2.0 * xr / (q.wx * q.wx);
  const double du_dyr = 2.0 * yr / (q.wy * q.wy);
  row[0] = g;                                           // amp
  row[1] = dm_du * (du_dxr * -c + du_dyr * s);          // xc
  row[2] = dm_du * (du_dxr * -s + du_dyr * -c);         // yc
  row[3] = dm_du * (-2.0 * xr * xr / (q.wx * q.wx * q.wx));  // wx
  row[4] = dm_du * (-2.0 * yr * yr / (q.wy * q.wy * q.wy));  // wy
  row[5] = dm_du * (2.0 * xr * yr * (1.0 / (q.wx * q.wx) - 1.0 / (q.wy * q.wy)));
  row[6] = -q.amp * g * g * up * std::log(u);           // p
}

// Cholesky solve of a small SPD system, in place.
bool solve_spd(std::array<std::array<double, 7>, 7>& a, std::array<double, 7>& b) {
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < i; ++j) {
      double s = a[i][j];
      for (int k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
      a[i][j] = s / a[j][j];
    }
    double s = a[i][i];
    for (int k = 0; k < i; ++k) s -= a[i][k] * a[i][k];
    if (s <= 0) return false;
    a[i][i] = std::sqrt(s);
  }
  for (int i = 0; i < 7; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= a[i][k] * b[k];
    b[i] = s / a[i][i];
  }
  for (int i = 6; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < 7; ++k) s -= a[k][i] * b[k];
    b[i] = s / a[i][i];
  }
  return true;
}

double cost_of(const Image& img, const LorentzParams& q) {
  double c = 0;
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j) {
      const double r = img(i, j) - lorentz_model(q, j, i);
      c += r * r;
    }
  return c;
}

void clamp_params(LorentzParams& q, int h, int w) {
  q.amp = std::max(q.amp, 1e-12);
  q.wx = std::clamp(q.wx, 0.3, double(std::max(h, w)));
  q.wy = std::clamp(q.wy, 0.3, double(std::max(h, w)));
  q.p = std::clamp(q.p, 0.3, 12.0);
  q.xc = std::clamp(q.xc, 0.0, double(w - 1));
  q.yc = std::clamp(q.yc, 0.0, double(h - 1));
}

}  // namespace

double fwhm_lorentzian(const Image& image) {
  const int h = image.height(), w = image.width();
  // init from the moments of the positive part
  const Moments mom = weighted_moments(image, 0.0);
  const double mxx = std::max(mom.mu20, 0.25), myy = std::max(mom.mu02, 0.25);
  const double mxy = mom.mu11;
  const double tr = 0.5 * (mxx + myy);
  const double det = std::sqrt(std::max(0.25 * (mxx - myy) * (mxx - myy) + mxy * mxy, 0.0));
  const double l1 = std::max(tr + det, 0.09), l2 = std::max(tr - det, 0.09);

  LorentzParams q;
  q.amp = image.max_value();
  if (q.amp <= 0) throw estimation_error("fwhm_lorentzian: non-positive peak");
  q.xc = mom.centroid[1];
  q.yc = mom.centroid[0];
  q.theta = 0.5 * std::atan2(2.0 * mxy, mxx - myy);
  q.wx = 1.1774 * std::sqrt(l1);
  q.wy = 1.1774 * std::sqrt(l2);
  q.p = 1.3;
  clamp_params(q, h, w);

  double cost = cost_of(image, q);
  double lm = 1e-3;
  std::array<double, 7> jrow{};
  bool moved = false;
  for (int it = 0; it < 200; ++it) {
    std::array<std::array<double, 7>, 7> jtj{};
    std::array<double, 7> jtr{};
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double r = image(i, j) - lorentz_model(q, j, i);
        lorentz_jacobian(q, j, i, jrow.data());
        for (int a = 0; a < 7; ++a) {
          jtr[a] += jrow[a] * r;
          for (int b = 0; b <= a; ++b) jtj[a][b] += jrow[a] * jrow[b];
        }
      }
    for (int a = 0; a < 7; ++a)
      for (int b = a + 1; b < 7; ++b) jtj[a][b] = jtj[b][a];

    bool accepted = false;
    for (int tries = 0; tries < 12 && !accepted; ++tries) {
      auto damped = jtj;
      for (int a = 0; a < 7; ++a)
        damped[a][a] += lm * std::max(jtj[a][a], 1e-12);
      auto step = jtr;
      if (solve_spd(damped, step)) {
        LorentzParams trial = q;
        trial.amp += step[0];
        trial.xc += step[1];
        trial.yc += step[2];
        trial.wx += step[3];
        trial.wy += step[4];
        trial.theta += step[5];
        trial.p += step[6];
        clamp_params(trial, h, w);
        const double trial_cost = cost_of(image, trial);
        if (std::isfinite(trial_cost) && trial_cost < cost) {
          const double gain = (cost - trial_cost) / std::max(cost, 1e-300);
          q = trial;
          cost = trial_cost;
          lm = std::max(lm * 0.3, 1e-12);
          accepted = true;
          moved = true;
          if (gain < 1e-12) it = 200;  // converged
          continue;
        }
      }
      lm *= 8.0;
    }
    if (!accepted) break;
  }
  if (!moved && cost > 1e-20)
    throw estimation_error("fwhm_lorentzian: fit failed to improve");
  return 2.0 * std::sqrt(q.wx * q.wy);
}

ShapeMeasurement measure_shape(const Image& image, double weight_sigma) {
  ShapeMeasurement s;
  const Moments m = weighted_moments(image, weight_sigma);
  const auto [e1, e2] = ellipticity(m);
  s.e1 = e1;
  s.e2 = e2;
  s.centroid = m.centroid;
  s.mu20 = m.mu20;
  s.mu02 = m.mu02;
  s.mu11 = m.mu11;
  s.fwhm = fwhm_lorentzian(image);
  return s;
}

EllipticityErrorStats mean_abs_ellipticity_error(
    const std::vector<std::pair<double, double>>& truths,
    const std::vector<std::pair<double, double>>& recons) {
  if (truths.empty() || truths.size() != recons.size())
    throw input_error("mean_abs_ellipticity_error: list size mismatch");
  const double n = double(truths.size());
  EllipticityErrorStats s;
  std::vector<double> d1(truths.size()), d2(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) {
    d1[i] = std::abs(truths[i].first - recons[i].first);
    d2[i] = std::abs(truths[i].second - recons[i].second);
    s.e1_mean += d1[i];
    s.e2_mean += d2[i];
  }
  s.e1_mean /= n;
  s.e2_mean /= n;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    s.e1_std += (d1[i] - s.e1_mean) * (d1[i] - s.e1_mean);
    s.e2_std += (d2[i] - s.e2_mean) * (d2[i] - s.e2_mean);
  }
  s.e1_std = std::sqrt(s.e1_std / n);
  s.e2_std = std::sqrt(s.e2_std / n);
  return s;
}

double pearson_correlation(const Image& a, const Image& b) {
  if (!a.same_dims(b)) throw input_error("pearson_correlation: dims mismatch");
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < n; ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= double(n);
  mb /= double(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double da = a[k] - ma, db = b[k] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0 || sbb <= 0)
    throw input_error("pearson_correlation: constant input");
  return sab / std::sqrt(saa * sbb);
}

std::pair<Image, double> error_map_stats(const Image& truth, const Image& recon) {
  if (!truth.same_dims(recon)) throw input_error("error_map_stats: dims mismatch");
  Image map(truth.height(), truth.width(), truth.pitch_scale());
  double mean = 0;
  for (std::size_t k = 0; k < map.size(); ++k) {
    map[k] = std::abs(truth[k] - recon[k]);
    mean += map[k];
  }
  mean /= double(map.size());
  double var = 0;
  for (std::size_t k = 0; k < map.size(); ++k)
    var += (map[k] - mean) * (map[k] - mean);
  return {std::move(map), std::sqrt(var / double(map.size()))};
}

}  // namespace sprite

#include "sprite/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sprite/errors.hpp"
#include "sprite/linalg.hpp"

namespace sprite {

double estimate_sigma_mad(const Image& image) {
  if (image.size() < 2) throw input_error("estimate_sigma_mad: need >= 2 pixels");
  return 1.4826 * mad(image.pixels());
}

double centroid_threshold(const Image& image, double sigma) {
  double amax = 0.0;
  for (double v : image.pixels()) amax = std::max(amax, std::abs(v));
  return std::min(4.0 * sigma, (amax / sigma - 1.0) * sigma);
}

namespace {

// Flux-weighted interquartile width of a nonnegative marginal profile.
double quartile_width(const std::vector<double>& marginal) {
  double total = 0.0;
  for (double v : marginal) total += v;
  if (total <= 0.0) return 1.0;
  auto crossing = [&](double frac) {
    const double target = frac * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < marginal.size(); ++i) {
      const double next = acc + marginal[i];
      if (next >= target) {
        const double within = marginal[i] > 0 ? (target - acc) / marginal[i] : 0.5;
        return double(i) - 0.5 + within;
      }
      acc = next;
    }
    return double(marginal.size()) - 0.5;
  };
  return crossing(0.75) - crossing(0.25);
}

}  // namespace

std::array<double, 2> estimate_centroid(const Image& image, double sigma) {
  const double thr = sigma > 0 ? centroid_threshold(image, sigma) : 0.0;
  Image work(image.height(), image.width());
  double kept = 0.0;
  for (int i = 0; i < image.height(); ++i)
    for (int j = 0; j < image.width(); ++j) {
      const double v = image(i, j);
      if (v >= thr && v > 0.0) {
        work(i, j) = v;
        kept += v;
      }
    }
  if (kept <= 0.0)
    throw estimation_error("estimate_centroid: no pixel above threshold");

  // window width from a coarse quartile-based size of the thresholded blob
  std::vector<double> mrow(image.height(), 0.0), mcol(image.width(), 0.0);
  for (int i = 0; i < image.height(); ++i)
    for (int j = 0; j < image.width(); ++j) {
      mrow[i] += work(i, j);
      mcol[j] += work(i, j);
    }
  const double iqr = 0.5 * (quartile_width(mrow) + quartile_width(mcol));
  const double sigma_w =
      std::clamp(iqr / 1.349, 1.0, 0.5 * std::min(image.height(), image.width()));

  double ci = 0.0, cj = 0.0;
  for (int i = 0; i < image.height(); ++i)
    for (int j = 0; j < image.width(); ++j) {
      ci += i * work(i, j);
      cj += j * work(i, j);
    }
  ci /= kept;
  cj /= kept;

  const double inv2s2 = 1.0 / (2.0 * sigma_w * sigma_w);
  for (int pass = 0; pass < 50; ++pass) {
    double wsum = 0.0, wi = 0.0, wj = 0.0;
    for (int i = 0; i < image.height(); ++i)
      for (int j = 0; j < image.width(); ++j) {
        const double v = work(i, j);
        if (v == 0.0) continue;
        const double di = i - ci, dj = j - cj;
        const double w = v * std::exp(-(di * di + dj * dj) * inv2s2);
        wsum += w;
        wi += w * i;
        wj += w * j;
      }
    if (wsum <= 0.0)
      throw estimation_error("estimate_centroid: weight window collapsed");
    const double ni = wi / wsum, nj = wj / wsum;
    const double move = std::hypot(ni - ci, nj - cj);
    ci = ni;
    cj = nj;
    if (move < 1e-4) break;
  }
  return {ci, cj};
}

std::vector<std::array<double, 2>> estimate_shifts(const LRStack& stack) {
  stack.validate();
  std::vector<std::array<double, 2>> centroids;
  for (int k = 0; k < stack.count(); ++k) {
    const Image& img = stack.exposures[k].image;
    const double sigma = estimate_sigma_mad(img);
    try {
      centroids.push_back(estimate_centroid(img, sigma));
    } catch (const estimation_error& e) {
      throw estimation_error("exposure " + std::to_string(k) + ": " + e.what());
    }
  }
  std::vector<std::array<double, 2>> shifts(centroids.size());
  for (std::size_t k = 0; k < centroids.size(); ++k)
    shifts[k] = {centroids[k][0] - centroids[0][0],
                 centroids[k][1] - centroids[0][1]};
  shifts[0] = {0.0, 0.0};
  return shifts;
}

double estimate_flux(const Image& image, std::array<double, 2> centroid,
                     double radius) {
  const double r2 = radius * radius;
  double sum = 0.0;
  bool any = false;
  const int i0 = std::max(0, int(std::floor(centroid[0] - radius)));
  const int i1 = std::min(image.height() - 1, int(std::ceil(centroid[0] + radius)));
  const int j0 = std::max(0, int(std::floor(centroid[1] - radius)));
  const int j1 = std::min(image.width() - 1, int(std::ceil(centroid[1] + radius)));
  for (int i = i0; i <= i1; ++i)
    for (int j = j0; j <= j1; ++j) {
      const double di = i - centroid[0], dj = j - centroid[1];
      if (di * di + dj * dj <= r2) {
        sum += image(i, j);
        any = true;
      }
    }
  if (!any) throw estimation_error("estimate_flux: empty aperture");
  return sum;
}

EstimationReport estimate_stack(const LRStack& stack, const EstimationOptions& opts) {
  stack.validate();
  const int n = stack.count();
  EstimationReport rep;
  rep.aperture_radius = opts.aperture_radius;
  rep.sigmas.resize(n);
  rep.fluxes.assign(n, 1.0);

  for (int k = 0; k < n; ++k) {
    const Image& img = stack.exposures[k].image;
    double s = opts.estimate_noise ? estimate_sigma_mad(img) : opts.default_sigma;
    if (s <= 1e-9 * (1.0 + img.max_value())) rep.sigma_degenerate = true;
    rep.sigmas[k] = s;
  }
  if (rep.sigma_degenerate)  // effectively noise-free data: weight uniformly
    std::fill(rep.sigmas.begin(), rep.sigmas.end(), 1.0);

  for (int k = 0; k < n; ++k) {
    const Image& img = stack.exposures[k].image;
    const double mad_sigma = estimate_sigma_mad(img);
    try {
      rep.centroids.push_back(estimate_centroid(img, mad_sigma));
    } catch (const estimation_error& e) {
      throw estimation_error("exposure " + std::to_string(k) + ": " + e.what());
    }
  }
  rep.shifts.resize(n);
  for (int k = 0; k < n; ++k)
    rep.shifts[k] = {rep.centroids[k][0] - rep.centroids[0][0],
                     rep.centroids[k][1] - rep.centroids[0][1]};
  rep.shifts[0] = {0.0, 0.0};

  if (opts.estimate_flux) {
    std::vector<double> apertures(n);
    for (int k = 0; k < n; ++k) {
      apertures[k] = estimate_flux(stack.exposures[k].image, rep.centroids[k],
                                   opts.aperture_radius);
      if (apertures[k] <= 0.0)
        throw estimation_error("exposure " + std::to_string(k) +
                               ": non-positive aperture flux");
    }
    for (int k = 0; k < n; ++k) rep.fluxes[k] = apertures[k] / apertures[0];
  }
  return rep;
}

LRStack apply_report(const LRStack& stack, const EstimationReport& report) {
  LRStack out = stack;
  for (int k = 0; k < out.count(); ++k) {
    out.exposures[k].sigma = report.sigmas[k];
    out.exposures[k].flux = report.fluxes[k];
    out.exposures[k].shift = report.shifts[k];
  }
  return out;
}

}  // namespace sprite

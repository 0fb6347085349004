#include "sprite/wavelets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "sprite/errors.hpp"
#include "sprite/linalg.hpp"

namespace sprite {

namespace {

// B3-spline scaling filter of the starlet scheme.
const std::vector<double> kB3{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

// CDF 9/7 lowpass pair in the sqrt(2) convention, rescaled to DC gain 1 so
// the a-trous pyramid preserves constants (the product carries the 1/2).
std::vector<double> cdf97_analysis_lp() {
  const std::vector<double> h{0.037828455506995, -0.023849465019380,
                              -0.110624404418423, 0.377402855612654,
                              0.852698679009403, 0.377402855612654,
                              -0.110624404418423, -0.023849465019380,
                              0.037828455506995};
  std::vector<double> out(h.size());
  const double inv = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] * inv;
  return out;
}

std::vector<double> cdf97_synthesis_lp() {
  const std::vector<double> h{-0.064538882628938, -0.040689417609558,
                              0.418092273222212, 0.788485616405664,
                              0.418092273222212, -0.040689417609558,
                              -0.064538882628938};
  std::vector<double> out(h.size());
  const double inv = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] * inv;
  return out;
}

struct FilterPair {
  std::vector<double> pyramid;  // smooths c_j into c_{j+1}
  std::vector<double> rebuild;  // second smoothing, also the synthesis smoother
};

const FilterPair& filters_for(Dictionary dict) {
  static const FilterPair starlet{kB3, kB3};
  static const FilterPair bior{cdf97_analysis_lp(), cdf97_synthesis_lp()};
  return dict == Dictionary::starlet2 ? starlet : bior;
}

// Whole-sample mirror extension, valid for any overshoot.
inline int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

// x convolved along columns (within each row) with filter dilated by s.
void conv_x(const Image& x, const std::vector<double>& c, int s, Image& out) {
  const int w = x.width(), h = x.height();
  const int hw = int(c.size()) / 2;
  const int reach = hw * s;
  const int lo = std::min(reach, w), hi = std::max(lo, w - reach);
  for (int i = 0; i < h; ++i) {
    const double* src = x.row(i);
    double* dst = out.row(i);
    for (int j = 0; j < lo; ++j) {
      double acc = 0.0;
      for (int t = 0; t < int(c.size()); ++t)
        acc += c[t] * src[mirror(j + (t - hw) * s, w)];
      dst[j] = acc;
    }
    for (int j = lo; j < hi; ++j) {
      double acc = 0.0;
      for (int t = 0; t < int(c.size()); ++t) acc += c[t] * src[j + (t - hw) * s];
      dst[j] = acc;
    }
    for (int j = hi; j < w; ++j) {
      double acc = 0.0;
      for (int t = 0; t < int(c.size()); ++t)
        acc += c[t] * src[mirror(j + (t - hw) * s, w)];
      dst[j] = acc;
    }
  }
}

// x convolved along rows with filter dilated by s (row-contiguous AXPYs).
void conv_y(const Image& x, const std::vector<double>& c, int s, Image& out) {
  const int w = x.width(), h = x.height();
  const int hw = int(c.size()) / 2;
  for (int i = 0; i < h; ++i) {
    double* dst = out.row(i);
    std::fill(dst, dst + w, 0.0);
    for (int t = 0; t < int(c.size()); ++t) {
      const double* src = x.row(mirror(i + (t - hw) * s, h));
      const double g = c[t];
      for (int j = 0; j < w; ++j) dst[j] += g * src[j];
    }
  }
}

// Scatter transposes of the two passes above.
void conv_x_adj(const Image& x, const std::vector<double>& c, int s, Image& out) {
  const int w = x.width(), h = x.height();
  const int hw = int(c.size()) / 2;
  for (int i = 0; i < h; ++i) {
    const double* src = x.row(i);
    double* dst = out.row(i);
    std::fill(dst, dst + w, 0.0);
    for (int j = 0; j < w; ++j) {
      const double v = src[j];
      for (int t = 0; t < int(c.size()); ++t)
        dst[mirror(j + (t - hw) * s, w)] += c[t] * v;
    }
  }
}

void conv_y_adj(const Image& x, const std::vector<double>& c, int s, Image& out) {
  const int w = x.width(), h = x.height();
  const int hw = int(c.size()) / 2;
  for (double& v : out.pixels()) v = 0.0;
  for (int i = 0; i < h; ++i) {
    const double* src = x.row(i);
    for (int t = 0; t < int(c.size()); ++t) {
      double* dst = out.row(mirror(i + (t - hw) * s, h));
      const double g = c[t];
      for (int j = 0; j < w; ++j) dst[j] += g * src[j];
    }
  }
}

// S = conv_y . conv_x, so S^T = conv_x_adj . conv_y_adj.
void smooth(const Image& x, const std::vector<double>& c, int s, Image& out,
            Image& tmp) {
  conv_x(x, c, s, tmp);
  conv_y(tmp, c, s, out);
}

void smooth_adj(const Image& x, const std::vector<double>& c, int s, Image& out,
                Image& tmp) {
  conv_y_adj(x, c, s, tmp);
  conv_x_adj(tmp, c, s, out);
}

}  // namespace

WaveletTransform::WaveletTransform(int height, int width, Dictionary dict,
                                   int levels)
    : height_(height), width_(width), levels_(levels), dict_(dict) {
  if (height <= 0 || width <= 0)
    throw input_error("WaveletTransform: dimensions must be positive");
  if (levels < 1) throw input_error("WaveletTransform: need at least one level");
  if (std::min(height, width) < (1 << levels))
    throw input_error("WaveletTransform: too many scales for image size");
}

void WaveletTransform::analyze_into(const Image& x,
                                    std::vector<double>& coeffs) const {
  if (x.height() != height_ || x.width() != width_)
    throw input_error("analyze: image dimensions mismatch");
  coeffs.resize(coeff_size());
  const FilterPair& f = filters_for(dict_);
  const std::size_t bs = band_size();
  Image c = x, c1(height_, width_), w(height_, width_), tmp(height_, width_);
  for (int j = 0; j < levels_; ++j) {
    const int s = 1 << j;
    smooth(c, f.pyramid, s, c1, tmp);
    smooth(c1, f.rebuild, s, w, tmp);
    double* out = coeffs.data() + bs * j;
    for (std::size_t k = 0; k < bs; ++k) out[k] = c[k] - w[k];
    std::swap(c, c1);
  }
  std::copy(c.pixels().begin(), c.pixels().end(), coeffs.data() + bs * levels_);
}

WaveletCoeffs WaveletTransform::analyze(const Image& x) const {
  WaveletCoeffs out;
  out.height = height_;
  out.width = width_;
  out.levels = levels_;
  out.dict = dict_;
  analyze_into(x, out.data);
  return out;
}

void WaveletTransform::adjoint_into(const std::vector<double>& coeffs,
                                    Image& out) const {
  if (coeffs.size() != coeff_size())
    throw input_error("adjoint: coefficient size mismatch");
  const FilterPair& f = filters_for(dict_);
  const std::size_t bs = band_size();
  // Backward sweep of the analysis recursion: g_{j+1} -> g_j.
  Image g(height_, width_), t(height_, width_), tmp(height_, width_),
      band(height_, width_);
  std::copy(coeffs.data() + bs * levels_, coeffs.data() + bs * (levels_ + 1),
            g.pixels().begin());
  for (int j = levels_ - 1; j >= 0; --j) {
    const int s = 1 << j;
    const double* u = coeffs.data() + bs * j;
    std::copy(u, u + bs, band.pixels().begin());
    smooth_adj(band, f.rebuild, s, t, tmp);  // S_b^T u_j
    for (std::size_t k = 0; k < bs; ++k) t[k] = g[k] - t[k];
    smooth_adj(t, f.pyramid, s, g, tmp);  // S_a^T (g - S_b^T u_j)
    for (std::size_t k = 0; k < bs; ++k) g[k] += u[k];
  }
  out = std::move(g);
}

Image WaveletTransform::adjoint(const WaveletCoeffs& coeffs) const {
  Image out;
  adjoint_into(coeffs.data, out);
  return out;
}

Image WaveletTransform::reconstruct(const std::vector<double>& coeffs) const {
  if (coeffs.size() != coeff_size())
    throw input_error("reconstruct: coefficient size mismatch");
  const FilterPair& f = filters_for(dict_);
  const std::size_t bs = band_size();
  Image c(height_, width_), t(height_, width_), tmp(height_, width_);
  std::copy(coeffs.data() + bs * levels_, coeffs.data() + bs * (levels_ + 1),
            c.pixels().begin());
  for (int j = levels_ - 1; j >= 0; --j) {
    const int s = 1 << j;
    smooth(c, f.rebuild, s, t, tmp);
    const double* w = coeffs.data() + bs * j;
    for (std::size_t k = 0; k < bs; ++k) c[k] = t[k] + w[k];
  }
  return c;
}

Image WaveletTransform::reconstruct(const WaveletCoeffs& coeffs) const {
  return reconstruct(coeffs.data);
}

double WaveletTransform::gram_spectral_radius() const {
  using Key = std::tuple<int, int, int, int>;
  static std::map<Key, double> cache;
  static std::mutex mutex;
  const Key key{height_, width_, int(dict_), levels_};
  {
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto apply = [this](const std::vector<double>& u) {
    Image img;
    adjoint_into(u, img);
    std::vector<double> out;
    analyze_into(img, out);
    return out;
  };
  const double rho = power_method(apply, coeff_size(), 1e-6, 1000).value;
  std::lock_guard lock(mutex);
  cache.emplace(key, rho);
  return rho;
}

std::vector<double> scale_noise_from_white(int height, int width, Dictionary dict,
                                           int levels, double sigma_pixel,
                                           int realizations, std::uint64_t seed) {
  if (sigma_pixel < 0) throw input_error("scale_noise_from_white: sigma < 0");
  using Key = std::tuple<int, int, int, int, int, std::uint64_t>;
  static std::map<Key, std::vector<double>> cache;
  static std::mutex mutex;
  const Key key{height, width, int(dict), levels, realizations, seed};
  std::vector<double> unit;
  {
    std::lock_guard lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) unit = it->second;
  }
  if (unit.empty()) {
    WaveletTransform wt(height, width, dict, levels);
    std::vector<double> sumsq(levels + 1, 0.0);
    std::vector<double> coeffs;
    Image noise(height, width);
    GaussianSampler rng(seed);
    for (int r = 0; r < realizations; ++r) {
      rng.fill(noise.pixels());
      wt.analyze_into(noise, coeffs);
      const std::size_t bs = wt.band_size();
      for (int b = 0; b <= levels; ++b) {
        const double* band = coeffs.data() + bs * b;
        double s = 0.0;
        for (std::size_t k = 0; k < bs; ++k) s += band[k] * band[k];
        sumsq[b] += s;
      }
    }
    unit.resize(levels + 1);
    const double denom = double(realizations) * height * width;
    for (int b = 0; b <= levels; ++b) unit[b] = std::sqrt(sumsq[b] / denom);
    std::lock_guard lock(mutex);
    cache.emplace(key, unit);
  }
  for (double& v : unit) v *= sigma_pixel;
  return unit;
}

std::vector<double> correlated_scale_noise(const WaveletCoeffs& coeffs,
                                           double k_thresh) {
  std::vector<double> sigmas(coeffs.band_count());
  std::vector<double> band(coeffs.band_size());
  std::vector<double> residual(coeffs.band_size());
  for (int b = 0; b < coeffs.band_count(); ++b) {
    const double* src = coeffs.band(b);
    std::copy(src, src + band.size(), band.begin());
    double sigma = 1.4826 * mad(band);
    if (sigma <= 0.0) {
      sigmas[b] = 0.0;
      continue;
    }
    for (int pass = 0; pass < 5; ++pass) {
      const double thr = k_thresh * sigma;
      for (std::size_t k = 0; k < band.size(); ++k)
        residual[k] = soft_threshold(band[k], thr) - band[k];
      const double next = 1.4826 * mad(residual);
      const bool settled = std::abs(next - sigma) <= 1e-6 * sigma;
      sigma = next;
      if (settled || sigma == 0.0) break;
    }
    sigmas[b] = sigma;
  }
  return sigmas;
}

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

double hard_threshold(double value, double threshold) {
  return std::abs(value) >= threshold ? value : 0.0;
}

WaveletCoeffs threshold_coeffs(WaveletCoeffs coeffs,
                               std::span<const double> thresholds,
                               ThresholdMode mode) {
  const std::size_t bs = coeffs.band_size();
  const bool per_scale = thresholds.size() == std::size_t(coeffs.band_count());
  if (!per_scale && thresholds.size() != coeffs.data.size())
    throw input_error("threshold_coeffs: threshold vector size mismatch");
  for (int b = 0; b < coeffs.levels; ++b) {  // coarse band exempt
    double* band = coeffs.band(b);
    for (std::size_t k = 0; k < bs; ++k) {
      const double thr = per_scale ? thresholds[b] : thresholds[bs * b + k];
      band[k] = mode == ThresholdMode::soft ? soft_threshold(band[k], thr)
                                            : hard_threshold(band[k], thr);
    }
  }
  return coeffs;
}

}  // namespace sprite

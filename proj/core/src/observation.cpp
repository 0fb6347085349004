#include "sprite/observation.hpp"

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstring>
#include <mutex>
#include <numbers>

#include "sprite/errors.hpp"

namespace sprite {

double lanczos4(double x) {
  const double ax = std::abs(x);
  if (ax == 0.0) return 1.0;
  if (ax >= 4.0) return 0.0;
  const double px = std::numbers::pi * x;
  return (std::sin(px) / px) * (std::sin(px / 4.0) / (px / 4.0));
}

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// 8-tap Lanczos4 filter for one axis of one exposure. The taps depend only
// on the fractional part of d*shift; source index is d*i - m - 4 + t.
struct AxisK {
  int m = 0;
  std::array<double, 8> taps{};
};

AxisK make_axis_kernel(double shift_lr, int d) {
  const double phi = double(d) * shift_lr;
  const double mf = std::floor(phi);
  AxisK k;
  k.m = int(mf);
  const double f = phi - mf;
  for (int t = 0; t < 8; ++t) k.taps[t] = lanczos4(double(t - 4) + f);
  return k;
}

int floor_div(int a, int b) {  // b > 0
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

int ceil_div(int a, int b) {  // b > 0
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

// A(i, v) = sum_t taps[t] * x(d*i - m - 4 + t, v); A is p_h x x.width()
void rows_gather(const Image& x, const AxisK& k, int d, Image& a) {
  for (int i = 0; i < a.height(); ++i) {
    double* out = a.row(i);
    for (int t = 0; t < 8; ++t) {
      const double g = k.taps[t];
      if (g == 0.0) continue;
      const int l = d * i - k.m - 4 + t;
      if (l < 0 || l >= x.height()) continue;
      const double* src = x.row(l);
      for (int v = 0; v < x.width(); ++v) out[v] += g * src[v];
    }
  }
}

// y(i, j) = sum_t taps[t] * a(i, d*j - m - 4 + t)
void cols_gather(const Image& a, const AxisK& k, int d, Image& y) {
  for (int i = 0; i < y.height(); ++i) {
    const double* arow = a.row(i);
    double* out = y.row(i);
    for (int t = 0; t < 8; ++t) {
      const double g = k.taps[t];
      if (g == 0.0) continue;
      const int base = -k.m - 4 + t;
      const int j0 = std::max(0, ceil_div(-base, d));
      const int j1 = std::min(y.width() - 1, floor_div(a.width() - 1 - base, d));
      for (int j = j0; j <= j1; ++j) out[j] += g * arow[d * j + base];
    }
  }
}

// scatter transpose of cols_gather: b(i, d*j - m - 4 + t) += taps[t] * r(i, j)
void cols_scatter(const Image& r, const AxisK& k, int d, Image& b) {
  for (int i = 0; i < r.height(); ++i) {
    const double* rrow = r.row(i);
    double* brow = b.row(i);
    for (int t = 0; t < 8; ++t) {
      const double g = k.taps[t];
      if (g == 0.0) continue;
      const int base = -k.m - 4 + t;
      const int j0 = std::max(0, ceil_div(-base, d));
      const int j1 = std::min(r.width() - 1, floor_div(b.width() - 1 - base, d));
      for (int j = j0; j <= j1; ++j) brow[d * j + base] += g * rrow[j];
    }
  }
}

// scatter transpose of rows_gather: x(d*i - m - 4 + t, v) += taps[t] * b(i, v)
void rows_scatter(const Image& b, const AxisK& k, int d, Image& x) {
  for (int i = 0; i < b.height(); ++i) {
    const double* brow = b.row(i);
    for (int t = 0; t < 8; ++t) {
      const double g = k.taps[t];
      if (g == 0.0) continue;
      const int l = d * i - k.m - 4 + t;
      if (l < 0 || l >= x.height()) continue;
      double* xrow = x.row(l);
      for (int v = 0; v < b.width(); ++v) xrow[v] += g * brow[v];
    }
  }
}

Image direct_forward(const Image& x_hr, const AxisK& kr, const AxisK& kc, int d,
                     int p_h, int p_w) {
  Image a(p_h, x_hr.width());
  rows_gather(x_hr, kr, d, a);
  Image y(p_h, p_w, x_hr.pitch_scale() * d);
  cols_gather(a, kc, d, y);
  return y;
}

void direct_adjoint_accum(const Image& r_lr, const AxisK& kr, const AxisK& kc,
                          int d, double scale, Image& x_out) {
  Image r = r_lr;
  if (scale != 1.0)
    for (double& v : r.pixels()) v *= scale;
  Image b(r.height(), x_out.width());
  cols_scatter(r, kc, d, b);
  rows_scatter(b, kr, d, x_out);
}

// Padded sizes stay in the family {2^a, 3*2^a} so the transform cost scales
// uniformly when the image doubles (plan quality varies wildly otherwise).
int next_fast_size(int n) {
  int pow2 = 1;
  while (pow2 < n) pow2 *= 2;
  const int three = 3 * (pow2 / 4);
  return (three >= n && three < pow2) ? three : pow2;
}

using cplx = std::complex<double>;

struct FftBuf {
  double* re = nullptr;
  fftw_complex* cx = nullptr;
  FftBuf(int nr, int nc) {
    re = fftw_alloc_real(std::size_t(nr) * nc);
    cx = fftw_alloc_complex(std::size_t(nr) * (nc / 2 + 1));
  }
  ~FftBuf() {
    fftw_free(re);
    fftw_free(cx);
  }
};

// Plans for one padded grid size; executed on per-call buffers.
struct FftEngine {
  int nr = 0, nc = 0;
  fftw_plan r2c = nullptr, c2r = nullptr;

  FftEngine(int nr_, int nc_) : nr(nr_), nc(nc_) {
    std::lock_guard lock(plan_mutex());
    FftBuf probe(nr, nc);
    r2c = fftw_plan_dft_r2c_2d(nr, nc, probe.re, probe.cx, FFTW_ESTIMATE);
    c2r = fftw_plan_dft_c2r_2d(nr, nc, probe.cx, probe.re, FFTW_ESTIMATE);
  }
  ~FftEngine() {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(r2c);
    fftw_destroy_plan(c2r);
  }
  FftEngine(const FftEngine&) = delete;
  FftEngine& operator=(const FftEngine&) = delete;
};

// DFT of the correlation kernel along one axis: time-domain taps placed at
// (m + 3 - t) mod n so that circular convolution realizes the gather above.
std::vector<cplx> axis_spectrum_full(const AxisK& k, int n) {
  std::vector<double> time(n, 0.0);
  for (int t = 0; t < 8; ++t) {
    int a = ((k.m + 4 - t) % n + n) % n;
    time[a] += k.taps[t];
  }
  std::vector<cplx> full(n);
  std::vector<cplx> half(n / 2 + 1);
  {
    std::lock_guard lock(plan_mutex());
    fftw_plan p = fftw_plan_dft_r2c_1d(
        n, time.data(), reinterpret_cast<fftw_complex*>(half.data()),
        FFTW_ESTIMATE);
    fftw_execute(p);
    fftw_destroy_plan(p);
  }
  for (int q = 0; q <= n / 2; ++q) full[q] = half[q];
  for (int q = n / 2 + 1; q < n; ++q) full[q] = std::conj(half[n - q]);
  return full;
}

struct ExposureKernel {
  AxisK krow, kcol;
  double scale = 1.0;  // f_k / sigma_k
  std::vector<cplx> spec_row;  // length nr
  std::vector<cplx> spec_col;  // length nc/2 + 1
};

void make_spectra(ExposureKernel& e, int nr, int nc) {
  e.spec_row = axis_spectrum_full(e.krow, nr);
  std::vector<cplx> col_full = axis_spectrum_full(e.kcol, nc);
  e.spec_col.assign(col_full.begin(), col_full.begin() + nc / 2 + 1);
}

// y(i,j) = scale * C(d*i, d*j) with C the padded circular correlation.
Image fft_forward(const Image& x_hr, const ExposureKernel& e, const FftEngine& eng,
                  int d, int p_h, int p_w) {
  const int nr = eng.nr, nc = eng.nc, nch = nc / 2 + 1;
  FftBuf buf(nr, nc);
  std::memset(buf.re, 0, sizeof(double) * std::size_t(nr) * nc);
  for (int i = 0; i < x_hr.height(); ++i)
    std::memcpy(buf.re + std::size_t(i) * nc, x_hr.row(i),
                sizeof(double) * x_hr.width());
  fftw_execute_dft_r2c(eng.r2c, buf.re, buf.cx);
  for (int q0 = 0; q0 < nr; ++q0) {
    const cplx kr = e.spec_row[q0];
    cplx* row = reinterpret_cast<cplx*>(buf.cx) + std::size_t(q0) * nch;
    for (int q1 = 0; q1 < nch; ++q1) row[q1] *= kr * e.spec_col[q1];
  }
  fftw_execute_dft_c2r(eng.c2r, buf.cx, buf.re);
  const double norm = e.scale / (double(nr) * nc);
  Image y(p_h, p_w, x_hr.pitch_scale() * d);
  for (int i = 0; i < p_h; ++i)
    for (int j = 0; j < p_w; ++j)
      y(i, j) = norm * buf.re[std::size_t(d * i) * nc + d * j];
  return y;
}

void fft_adjoint_accum(const Image& r_lr, const ExposureKernel& e,
                       const FftEngine& eng, int d, Image& x_out) {
  const int nr = eng.nr, nc = eng.nc, nch = nc / 2 + 1;
  FftBuf buf(nr, nc);
  std::memset(buf.re, 0, sizeof(double) * std::size_t(nr) * nc);
  for (int i = 0; i < r_lr.height(); ++i)
    for (int j = 0; j < r_lr.width(); ++j)
      buf.re[std::size_t(d * i) * nc + d * j] = e.scale * r_lr(i, j);
  fftw_execute_dft_r2c(eng.r2c, buf.re, buf.cx);
  for (int q0 = 0; q0 < nr; ++q0) {
    const cplx kr = std::conj(e.spec_row[q0]);
    cplx* row = reinterpret_cast<cplx*>(buf.cx) + std::size_t(q0) * nch;
    for (int q1 = 0; q1 < nch; ++q1) row[q1] *= kr * std::conj(e.spec_col[q1]);
  }
  fftw_execute_dft_c2r(eng.c2r, buf.cx, buf.re);
  const double norm = 1.0 / (double(nr) * nc);
  for (int u = 0; u < x_out.height(); ++u) {
    double* xrow = x_out.row(u);
    const double* brow = buf.re + std::size_t(u) * nc;
    for (int v = 0; v < x_out.width(); ++v) xrow[v] += norm * brow[v];
  }
}

int padded_size(int hr_len, int max_abs_m) {
  return next_fast_size(hr_len + max_abs_m + 8);
}

bool use_fft_for(ConvPath path, int hr_h, int hr_w) {
  if (path == ConvPath::fft) return true;
  if (path == ConvPath::direct) return false;
  return std::max(hr_h, hr_w) >= 64;
}

}  // namespace

Image predict_exposure(const Image& x_hr, std::array<double, 2> shift_lr, int d,
                       ConvPath path) {
  if (d < 1) throw input_error("predict_exposure: upsampling factor must be >= 1");
  if (x_hr.height() % d != 0 || x_hr.width() % d != 0)
    throw input_error("predict_exposure: HR dims not divisible by d");
  const int p_h = x_hr.height() / d, p_w = x_hr.width() / d;
  AxisK kr = make_axis_kernel(shift_lr[0], d);
  AxisK kc = make_axis_kernel(shift_lr[1], d);
  if (!use_fft_for(path, x_hr.height(), x_hr.width()))
    return direct_forward(x_hr, kr, kc, d, p_h, p_w);
  const int nr = padded_size(x_hr.height(), std::abs(kr.m));
  const int nc = padded_size(x_hr.width(), std::abs(kc.m));
  FftEngine eng(nr, nc);
  ExposureKernel e;
  e.krow = kr;
  e.kcol = kc;
  make_spectra(e, nr, nc);
  return fft_forward(x_hr, e, eng, d, p_h, p_w);
}

struct ObservationOperator::Impl {
  std::vector<ExposureKernel> kernels;
  bool fft = false;
  std::unique_ptr<FftEngine> engine;
  double pitch_hr = 1.0;
};

ObservationOperator::ObservationOperator(const LRStack& stack, ConvPath path)
    : impl_(std::make_unique<Impl>()) {
  stack.validate();
  n_ = stack.count();
  p_w_ = stack.lr_width();
  p_h_ = stack.lr_height();
  d_ = stack.upsampling;
  impl_->pitch_hr = stack.exposures.front().image.pitch_scale() / d_;

  int max_m = 0;
  for (const auto& exp : stack.exposures) {
    ExposureKernel e;
    e.krow = make_axis_kernel(exp.shift[0], d_);
    e.kcol = make_axis_kernel(exp.shift[1], d_);
    e.scale = exp.flux / exp.sigma;
    max_m = std::max({max_m, std::abs(e.krow.m), std::abs(e.kcol.m)});
    impl_->kernels.push_back(std::move(e));
  }
  impl_->fft = use_fft_for(path, hr_height(), hr_width());
  if (impl_->fft) {
    const int nr = padded_size(hr_height(), max_m);
    const int nc = padded_size(hr_width(), max_m);
    impl_->engine = std::make_unique<FftEngine>(nr, nc);
    for (auto& e : impl_->kernels) make_spectra(e, nr, nc);
  }
}

ObservationOperator::~ObservationOperator() = default;

std::vector<double> ObservationOperator::forward(const Image& x_hr) const {
  if (x_hr.height() != hr_height() || x_hr.width() != hr_width())
    throw input_error("forward: HR image dimensions mismatch");
  std::vector<double> out(data_size());
  const std::size_t pp = std::size_t(p_w_) * p_h_;
  for (int k = 0; k < n_; ++k) {
    const auto& e = impl_->kernels[k];
    Image y = impl_->fft
                  ? fft_forward(x_hr, e, *impl_->engine, d_, p_h_, p_w_)
                  : direct_forward(x_hr, e.krow, e.kcol, d_, p_h_, p_w_);
    if (!impl_->fft && e.scale != 1.0)
      for (double& v : y.pixels()) v *= e.scale;
    std::memcpy(out.data() + k * pp, y.data(), pp * sizeof(double));
  }
  return out;
}

Image ObservationOperator::adjoint(const std::vector<double>& r) const {
  if (r.size() != data_size())
    throw input_error("adjoint: data vector size mismatch");
  Image x(hr_height(), hr_width(), impl_->pitch_hr);
  const std::size_t pp = std::size_t(p_w_) * p_h_;
  for (int k = 0; k < n_; ++k) {
    Image rk(p_h_, p_w_);
    std::memcpy(rk.data(), r.data() + k * pp, pp * sizeof(double));
    const auto& e = impl_->kernels[k];
    if (impl_->fft)
      fft_adjoint_accum(rk, e, *impl_->engine, d_, x);
    else
      direct_adjoint_accum(rk, e.krow, e.kcol, d_, e.scale, x);
  }
  return x;
}

Image ObservationOperator::normal_apply(const Image& x_hr) const {
  return adjoint(forward(x_hr));
}

Image ObservationOperator::gradient(const Image& x_hr, const std::vector<double>& z,
                                    double* j1) const {
  if (z.size() != data_size())
    throw input_error("gradient: data vector size mismatch");
  std::vector<double> res = forward(x_hr);
  for (std::size_t k = 0; k < res.size(); ++k) res[k] -= z[k];
  if (j1) *j1 = 0.5 * dot(res, res);
  return adjoint(res);
}

std::vector<double> ObservationOperator::weighted_data(const LRStack& stack) const {
  if (stack.count() != n_ || stack.lr_width() != p_w_ || stack.lr_height() != p_h_)
    throw input_error("weighted_data: stack does not match operator");
  std::vector<double> z(data_size());
  const std::size_t pp = std::size_t(p_w_) * p_h_;
  for (int k = 0; k < n_; ++k) {
    const double inv_sigma = 1.0 / stack.exposures[k].sigma;
    const double* src = stack.exposures[k].image.data();
    double* dst = z.data() + k * pp;
    for (std::size_t t = 0; t < pp; ++t) dst[t] = inv_sigma * src[t];
  }
  return z;
}

PowerMethodResult spectral_radius_normal(const ObservationOperator& op,
                                         double rel_tol, int max_iters) {
  const int h = op.hr_height(), w = op.hr_width();
  auto apply = [&op, h, w](const std::vector<double>& v) {
    Image x = unflatten(v, h, w);
    return flatten(op.normal_apply(x));
  };
  return power_method(apply, std::size_t(h) * w, rel_tol, max_iters);
}

}  // namespace sprite

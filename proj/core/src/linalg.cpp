#include "sprite/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sprite/errors.hpp"

namespace sprite {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

double median(std::vector<double> values) {
  if (values.empty()) throw input_error("median of empty set");
  const std::size_t n = values.size();
  auto mid = values.begin() + n / 2;
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(values.begin(), mid);
  return 0.5 * (lo + hi);
}

double mad(const std::vector<double>& values) {
  const double m = median(values);
  std::vector<double> dev(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) dev[k] = std::abs(values[k] - m);
  return median(std::move(dev));
}

PowerMethodResult power_method(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    std::size_t dim, double rel_tol, int max_iters, std::uint64_t seed) {
  GaussianSampler rng(seed);
  std::vector<double> v(dim);
  rng.fill(v);
  double nv = norm2(v);
  if (nv == 0.0) v[0] = nv = 1.0;
  for (double& x : v) x /= nv;

  PowerMethodResult res;
  double prev = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    std::vector<double> w = apply(v);
    const double lambda = dot(v, w);
    const double nw = norm2(w);
    res.iterations = it + 1;
    res.value = lambda;
    if (nw == 0.0) {  // map annihilates the start vector
      res.value = 0.0;
      res.converged = true;
      return res;
    }
    for (std::size_t k = 0; k < dim; ++k) v[k] = w[k] / nw;
    if (it > 0 && std::abs(lambda - prev) <= rel_tol * std::abs(lambda)) {
      res.converged = true;
      return res;
    }
    prev = lambda;
  }
  return res;  // best estimate, converged stays false
}

CGResult conjugate_gradient(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    const std::vector<double>& rhs, double rel_tol, int max_iters) {
  CGResult res;
  const double nb = norm2(rhs);
  res.x.assign(rhs.size(), 0.0);
  if (nb == 0.0) {
    res.converged = true;
    return res;
  }
  std::vector<double> r = rhs;
  std::vector<double> p = r;
  double rsq = dot(r, r);
  for (int it = 0; it < max_iters; ++it) {
    std::vector<double> ap = apply(p);
    const double pap = dot(p, ap);
    if (pap <= 0.0) break;  // lost positive definiteness numerically
    const double alpha = rsq / pap;
    axpy(alpha, p, res.x);
    axpy(-alpha, ap, r);
    const double rsq_new = dot(r, r);
    res.iterations = it + 1;
    res.rel_residual = std::sqrt(rsq_new) / nb;
    if (res.rel_residual < rel_tol) {
      res.converged = true;
      return res;
    }
    const double beta = rsq_new / rsq;
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = r[k] + beta * p[k];
    rsq = rsq_new;
  }
  return res;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

GaussianSampler::GaussianSampler(std::uint64_t seed) {
  // xoshiro256** state seeded via splitmix64
  std::uint64_t s = seed;
  for (auto& word : state_) {
    s += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    word = z ^ (z >> 31);
  }
}

static inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

double GaussianSampler::uniform01() {
  std::uint64_t* s = state_;
  const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
  const std::uint64_t t = s[1] << 17;
  s[2] ^= s[0];
  s[3] ^= s[1];
  s[1] ^= s[2];
  s[0] ^= s[3];
  s[2] ^= t;
  s[3] = rotl(s[3], 45);
  // 53-bit mantissa, strictly inside (0,1)
  return (double(result >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianSampler::next() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

void GaussianSampler::fill(std::vector<double>& out, double sigma) {
  for (double& v : out) v = sigma * next();
}

}  // namespace sprite

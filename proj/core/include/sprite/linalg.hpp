#ifndef SPRITE_LINALG_HPP
#define SPRITE_LINALG_HPP

#include <cstdint>
#include <functional>
#include <vector>

namespace sprite {

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);
double norm_inf(const std::vector<double>& a);

// y += alpha * x
void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y);

// Median and median absolute deviation (median-centred), destructive variants
// work on a scratch copy internally.
double median(std::vector<double> values);
double mad(const std::vector<double>& values);

struct PowerMethodResult {
  double value = 0.0;     // spectral radius estimate
  int iterations = 0;
  bool converged = false; // false means the iteration cap was hit
};

// Largest eigenvalue of a symmetric positive semidefinite map by power
// iteration. Deterministic: the start vector comes from a fixed seed.
PowerMethodResult power_method(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    std::size_t dim, double rel_tol = 1e-6, int max_iters = 1000,
    std::uint64_t seed = 0xa5e11u);

struct CGResult {
  std::vector<double> x;
  double rel_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Conjugate gradient for a symmetric positive definite map.
CGResult conjugate_gradient(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    const std::vector<double>& rhs, double rel_tol = 1e-10, int max_iters = 500);

// Deterministic xorshift-based stream splitting: child streams for (seed, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Standard-normal sampler with a stable bit-level contract (Box-Muller on top
// of mt19937_64), so seeded outputs are reproducible byte-for-byte.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed);
  double next();
  void fill(std::vector<double>& out, double sigma = 1.0);
  double uniform01();  // in (0,1)
  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

 private:
  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace sprite

#endif

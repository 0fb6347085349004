#ifndef SPRITE_OBSERVATION_HPP
#define SPRITE_OBSERVATION_HPP

#include <array>
#include <memory>
#include <vector>

#include "sprite/image.hpp"
#include "sprite/linalg.hpp"

namespace sprite {

// Lanczos4 interpolant: 1 at 0, sinc(x)*sinc(x/4) for 0 < |x| < 4, 0 beyond.
double lanczos4(double x);

enum class ConvPath {
  automatic,  // fft once the HR side reaches 64 pixels, direct below
  direct,
  fft,
};

// D*H_k applied to an HR image: Lanczos4 warp by an LR-pixel shift followed
// by decimation. shift is (row, column) in LR pixel units.
Image predict_exposure(const Image& x_hr, std::array<double, 2> shift_lr, int d,
                       ConvPath path = ConvPath::automatic);

// Matrix-free observation operator M: stacks (f_k/sigma_k) * D * H_k over the
// exposures of one LR stack. Forward maps an HR image to the concatenated
// data vector (n*p*p entries, exposure index outermost); adjoint maps back.
class ObservationOperator {
 public:
  explicit ObservationOperator(const LRStack& stack,
                               ConvPath path = ConvPath::automatic);
  ~ObservationOperator();
  ObservationOperator(const ObservationOperator&) = delete;
  ObservationOperator& operator=(const ObservationOperator&) = delete;

  int exposure_count() const { return n_; }
  int lr_width() const { return p_w_; }
  int lr_height() const { return p_h_; }
  int hr_width() const { return p_w_ * d_; }
  int hr_height() const { return p_h_ * d_; }
  int upsampling() const { return d_; }
  std::size_t data_size() const { return std::size_t(n_) * p_w_ * p_h_; }

  std::vector<double> forward(const Image& x_hr) const;
  Image adjoint(const std::vector<double>& r) const;

  // M^T M x, the map whose spectral radius bounds the gradient step.
  Image normal_apply(const Image& x_hr) const;

  // M^T(M x - z); when j1 is non-null it receives 1/2 ||M x - z||^2.
  Image gradient(const Image& x_hr, const std::vector<double>& z,
                 double* j1 = nullptr) const;

  // Noise-whitened data vector z with z_k = y_k / sigma_k.
  std::vector<double> weighted_data(const LRStack& stack) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int n_ = 0, p_w_ = 0, p_h_ = 0, d_ = 1;
};

// Power-iteration estimate of rho(M^T M).
PowerMethodResult spectral_radius_normal(const ObservationOperator& op,
                                         double rel_tol = 1e-6,
                                         int max_iters = 1000);

}  // namespace sprite

#endif

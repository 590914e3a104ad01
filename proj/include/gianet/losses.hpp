#pragma once

#include <vector>

#include "gianet/tensor.hpp"

namespace gianet::losses {

/// Constants of the structural-similarity family. Statistics use an
/// isotropic Gaussian window with "valid" extent (no padding).
struct SsimParams {
  int window = 11;
  float sigma = 1.5F;
  float k1 = 0.01F;
  float k2 = 0.03F;
  float dynamic_range = 1.0F;
  int levels = 5;
  /// Floor applied to each pyramid factor before the product.
  float factor_floor = 1e-6F;

  [[nodiscard]] float c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  [[nodiscard]] float c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  /// Smallest image side that supports `levels` pyramid levels.
  [[nodiscard]] int64_t min_side() const { return static_cast<int64_t>(window) << (levels - 1); }
  void validate() const;
};

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<float> gaussian_taps(int window, float sigma);

/// Mean absolute error (1/N) * sum |out - target|.
Tensor l1_loss(const Tensor& out, const Tensor& target);

struct SsimMaps {
  Tensor luminance;         // l(i)
  Tensor contrast_structure;  // cs(i)
};

/// Per-pixel, per-channel luminance and contrast-structure maps over valid
/// windows: shape (n, c, h - window + 1, w - window + 1).
SsimMaps ssim_maps(const Tensor& x, const Tensor& y, const SsimParams& params = {});

/// mean(l_M) * prod_j mean(cs_j) over a `levels`-deep pyramid built with 2x2
/// average pooling; every exponent is 1.
Tensor ms_ssim(const Tensor& x, const Tensor& y, const SsimParams& params = {});

/// Single-scale SSIM: mean of l * cs over the valid map (channels averaged).
Tensor ssim(const Tensor& x, const Tensor& y, const SsimParams& params = {});

struct LossReport {
  Tensor total;  // differentiable gamma * l1 + (1 - gamma) * (1 - ms_ssim)
  float l1_term = 0.0F;
  float msssim_term = 0.0F;  // 1 - ms_ssim
  float total_value = 0.0F;
  float gamma = 0.84F;
};

/// gamma * l1 + (1 - gamma) * msssim_loss as plain numbers.
float combine_terms(float gamma, float l1_term, float msssim_term);

LossReport joint_loss(const Tensor& out, const Tensor& target, float gamma = 0.84F, const SsimParams& params = {});

/// 20 log10(max_val) - 10 log10(MSE); +infinity when MSE is 0.
double psnr(const Tensor& out, const Tensor& target, double max_val = 1.0);

}  // namespace gianet::losses

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gianet/tensor.hpp"

namespace gianet::nn {

/// Geometry of a 2-D convolution. With `same_padding` each side is padded by
/// dilation*(k-1)/2, which preserves (h, w) at stride 1 and needs odd kernels.
struct Conv2dSpec {
  int64_t in_ch = 1;
  int64_t out_ch = 1;
  int64_t kernel_h = 3;
  int64_t kernel_w = 3;
  int64_t stride_h = 1;
  int64_t stride_w = 1;
  int64_t dilation = 1;
  bool same_padding = true;
  int64_t pad_h = 0;
  int64_t pad_w = 0;
  bool bias = true;

  static Conv2dSpec same(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t dilation = 1, bool bias = true);
  /// Stride-2 2x2 kernel, the only layout conv2d_transposed accepts.
  static Conv2dSpec upsample2x(int64_t in_ch, int64_t out_ch, bool bias = false);

  void validate() const;
  [[nodiscard]] int64_t effective_pad_h() const;
  [[nodiscard]] int64_t effective_pad_w() const;
  [[nodiscard]] int64_t param_count() const { return in_ch * out_ch * kernel_h * kernel_w + (bias ? out_ch : 0); }
  /// Input extent seen by one output of a single layer: 1 + d*(k-1).
  [[nodiscard]] int64_t receptive_field() const { return 1 + dilation * (kernel_h - 1); }
};

/// Cross-correlation with dilation. weight (out_ch, in_ch, kh, kw); `bias` is
/// ignored when undefined.
Tensor conv2d(const Tensor& x, const Conv2dSpec& spec, const Tensor& weight, const Tensor& bias = {});

/// Stride-2 2x2 transposed convolution, weight (in_ch, out_ch, 2, 2). Its
/// input gradient is conv2d (stride 2, 2x2, same weights) of the output
/// gradient.
Tensor conv2d_transposed(const Tensor& x, const Conv2dSpec& spec, const Tensor& weight, const Tensor& bias = {});

/// Ties go to the first row-major maximum of each window.
Tensor maxpool2x2(const Tensor& x);
/// 2x2 mean pooling; a trailing odd row/column is dropped.
Tensor avg_pool2x2(const Tensor& x);
Tensor global_avg_pool(const Tensor& x);
/// Half-pixel (align-corners-false) bilinear resize to a size >= the input.
Tensor bilinear_upsample(const Tensor& x, int64_t out_h, int64_t out_w);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor concat_channels(const std::vector<Tensor>& parts);

/// (n, c*r*r, h, w) -> (n, c, h*r, w*r); channel c*r*r + i*r + j lands at
/// sub-pixel (i, j).
Tensor depth_to_space(const Tensor& x, int64_t r);
Tensor space_to_depth(const Tensor& x, int64_t r);

/// x for x >= 0, slope*x otherwise; the gradient at exactly 0 is 1.
Tensor leaky_relu(const Tensor& x, float slope = 0.2F);

/// Depthwise "valid" filtering of every plane with outer(taps, taps).
Tensor separable_filter_valid(const Tensor& x, std::span<const float> taps);

}  // namespace gianet::nn

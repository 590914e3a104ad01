#pragma once

#include <cstdint>

#include "gianet/tensor.hpp"

// Raw-buffer compute kernels behind the differentiable ops.
//
// The default kernels lower convolution to column-blocked im2col + GEMM and
// split work across OpenMP threads in fixed-size blocks, so results do not
// depend on the thread count. `kernels::reference` holds direct serial loops
// with double accumulation; tests and the benchmark compare the two.
//
// All backward kernels accumulate (+=) into their gradient outputs.

namespace gianet::kernels {

struct ConvGeometry {
  int64_t batch = 0;
  int64_t in_ch = 0;
  int64_t in_h = 0;
  int64_t in_w = 0;
  int64_t out_ch = 0;
  int64_t kernel_h = 1;
  int64_t kernel_w = 1;
  int64_t stride_h = 1;
  int64_t stride_w = 1;
  int64_t dilation = 1;
  int64_t pad_h = 0;
  int64_t pad_w = 0;
  int64_t out_h = 0;
  int64_t out_w = 0;

  /// Fills out_h/out_w from the other fields; throws ShapeError if empty.
  static ConvGeometry make(Shape input, int64_t out_ch, int64_t kernel_h, int64_t kernel_w, int64_t stride_h,
                           int64_t stride_w, int64_t dilation, int64_t pad_h, int64_t pad_w);

  [[nodiscard]] int64_t patch_size() const { return in_ch * kernel_h * kernel_w; }
  [[nodiscard]] int64_t out_plane() const { return out_h * out_w; }
};

/// weight: (out_ch, in_ch, kh, kw); bias may be null.
void conv2d_forward(const ConvGeometry& g, const float* input, const float* weight, const float* bias, float* output);
void conv2d_backward_input(const ConvGeometry& g, const float* grad_output, const float* weight, float* grad_input);
void conv2d_backward_weight(const ConvGeometry& g, const float* input, const float* grad_output, float* grad_weight,
                            float* grad_bias);

/// Stride-2, 2x2 transposed convolution. input (n, in_ch, h, w),
/// weight (in_ch, out_ch, 2, 2), output (n, out_ch, 2h, 2w).
struct UpsampleGeometry {
  int64_t batch = 0;
  int64_t in_ch = 0;
  int64_t out_ch = 0;
  int64_t in_h = 0;
  int64_t in_w = 0;
};

void conv_transpose2x2_forward(const UpsampleGeometry& g, const float* input, const float* weight, const float* bias,
                               float* output);
void conv_transpose2x2_backward_input(const UpsampleGeometry& g, const float* grad_output, const float* weight,
                                      float* grad_input);
void conv_transpose2x2_backward_weight(const UpsampleGeometry& g, const float* input, const float* grad_output,
                                       float* grad_weight, float* grad_bias);

/// 2x2/stride-2 max pool over (planes, h, w); argmax holds the flat in-plane
/// index of the first row-major maximum of each window.
void maxpool2x2_forward(int64_t planes, int64_t h, int64_t w, const float* input, float* output, int32_t* argmax);
void maxpool2x2_backward(int64_t planes, int64_t h, int64_t w, const float* grad_output, const int32_t* argmax,
                         float* grad_input);

/// Separable "valid" filtering of each (h, w) plane by the outer product of
/// `taps` with itself. Output planes are (h - k + 1, w - k + 1).
void separable_filter_valid(int64_t planes, int64_t h, int64_t w, const float* taps, int64_t k, const float* input,
                            float* output);
void separable_filter_valid_backward(int64_t planes, int64_t h, int64_t w, const float* taps, int64_t k,
                                     const float* grad_output, float* grad_input);

namespace reference {

void conv2d_forward(const ConvGeometry& g, const float* input, const float* weight, const float* bias, float* output);
void conv2d_backward_input(const ConvGeometry& g, const float* grad_output, const float* weight, float* grad_input);
void conv2d_backward_weight(const ConvGeometry& g, const float* input, const float* grad_output, float* grad_weight,
                            float* grad_bias);

void conv_transpose2x2_forward(const UpsampleGeometry& g, const float* input, const float* weight, const float* bias,
                               float* output);

void maxpool2x2_forward(int64_t planes, int64_t h, int64_t w, const float* input, float* output, int32_t* argmax);

void separable_filter_valid(int64_t planes, int64_t h, int64_t w, const float* taps, int64_t k, const float* input,
                            float* output);

}  // namespace reference

}  // namespace gianet::kernels

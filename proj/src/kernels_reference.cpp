#include "gianet/kernels.hpp"

// Direct serial loops with double accumulators. Slow by design; kept as the
// ground truth the blocked kernels are tested and benchmarked against.

namespace gianet::kernels::reference {

namespace {

inline int64_t in_index(const ConvGeometry& g, int64_t n, int64_t c, int64_t y, int64_t x) {
  return ((n * g.in_ch + c) * g.in_h + y) * g.in_w + x;
}

inline int64_t out_index(const ConvGeometry& g, int64_t n, int64_t c, int64_t y, int64_t x) {
  return ((n * g.out_ch + c) * g.out_h + y) * g.out_w + x;
}

inline int64_t w_index(const ConvGeometry& g, int64_t oc, int64_t ic, int64_t ky, int64_t kx) {
  return ((oc * g.in_ch + ic) * g.kernel_h + ky) * g.kernel_w + kx;
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, const float* input, const float* weight, const float* bias, float* output) {
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t oc = 0; oc < g.out_ch; ++oc) {
      for (int64_t oy = 0; oy < g.out_h; ++oy) {
        for (int64_t ox = 0; ox < g.out_w; ++ox) {
          double acc = bias != nullptr ? bias[oc] : 0.0;
          for (int64_t ic = 0; ic < g.in_ch; ++ic) {
            for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
              for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
                const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dilation;
                const int64_t ix = ox * g.stride_w - g.pad_w + kx * g.dilation;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) {
                  continue;
                }
                acc += static_cast<double>(input[in_index(g, n, ic, iy, ix)]) * weight[w_index(g, oc, ic, ky, kx)];
              }
            }
          }
          output[out_index(g, n, oc, oy, ox)] = static_cast<float>(acc);
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, const float* grad_output, const float* weight, float* grad_input) {
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t ic = 0; ic < g.in_ch; ++ic) {
      for (int64_t iy = 0; iy < g.in_h; ++iy) {
        for (int64_t ix = 0; ix < g.in_w; ++ix) {
          double acc = 0.0;
          for (int64_t oc = 0; oc < g.out_ch; ++oc) {
            for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
              for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
                const int64_t ny = iy + g.pad_h - ky * g.dilation;
                const int64_t nx = ix + g.pad_w - kx * g.dilation;
                if (ny < 0 || nx < 0 || ny % g.stride_h != 0 || nx % g.stride_w != 0) {
                  continue;
                }
                const int64_t oy = ny / g.stride_h;
                const int64_t ox = nx / g.stride_w;
                if (oy >= g.out_h || ox >= g.out_w) {
                  continue;
                }
                acc += static_cast<double>(grad_output[out_index(g, n, oc, oy, ox)]) *
                       weight[w_index(g, oc, ic, ky, kx)];
              }
            }
          }
          grad_input[in_index(g, n, ic, iy, ix)] += static_cast<float>(acc);
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, const float* input, const float* grad_output, float* grad_weight,
                            float* grad_bias) {
  for (int64_t oc = 0; oc < g.out_ch; ++oc) {
    for (int64_t ic = 0; ic < g.in_ch; ++ic) {
      for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
        for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
          double acc = 0.0;
          for (int64_t n = 0; n < g.batch; ++n) {
            for (int64_t oy = 0; oy < g.out_h; ++oy) {
              for (int64_t ox = 0; ox < g.out_w; ++ox) {
                const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dilation;
                const int64_t ix = ox * g.stride_w - g.pad_w + kx * g.dilation;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) {
                  continue;
                }
                acc += static_cast<double>(grad_output[out_index(g, n, oc, oy, ox)]) *
                       input[in_index(g, n, ic, iy, ix)];
              }
            }
          }
          grad_weight[w_index(g, oc, ic, ky, kx)] += static_cast<float>(acc);
        }
      }
    }
    if (grad_bias != nullptr) {
      double acc = 0.0;
      for (int64_t n = 0; n < g.batch; ++n) {
        for (int64_t p = 0; p < g.out_plane(); ++p) {
          acc += grad_output[(n * g.out_ch + oc) * g.out_plane() + p];
        }
      }
      grad_bias[oc] += static_cast<float>(acc);
    }
  }
}

void conv_transpose2x2_forward(const UpsampleGeometry& g, const float* input, const float* weight, const float* bias,
                               float* output) {
  const int64_t oh = 2 * g.in_h;
  const int64_t ow = 2 * g.in_w;
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t oc = 0; oc < g.out_ch; ++oc) {
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t x = 0; x < ow; ++x) {
          double acc = bias != nullptr ? bias[oc] : 0.0;
          for (int64_t ic = 0; ic < g.in_ch; ++ic) {
            const float v = input[((n * g.in_ch + ic) * g.in_h + y / 2) * g.in_w + x / 2];
            acc += static_cast<double>(v) * weight[((ic * g.out_ch + oc) * 2 + y % 2) * 2 + x % 2];
          }
          output[((n * g.out_ch + oc) * oh + y) * ow + x] = static_cast<float>(acc);
        }
      }
    }
  }
}

void maxpool2x2_forward(int64_t planes, int64_t h, int64_t w, const float* input, float* output, int32_t* argmax) {
  const int64_t oh = h / 2;
  const int64_t ow = w / 2;
  for (int64_t p = 0; p < planes; ++p) {
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t x = 0; x < ow; ++x) {
        int64_t best = -1;
        for (int64_t dy = 0; dy < 2; ++dy) {
          for (int64_t dx = 0; dx < 2; ++dx) {
            const int64_t i = (2 * y + dy) * w + 2 * x + dx;
            if (best < 0 || input[p * h * w + i] > input[p * h * w + best]) {
              best = i;
            }
          }
        }
        output[p * oh * ow + y * ow + x] = input[p * h * w + best];
        if (argmax != nullptr) argmax[p * oh * ow + y * ow + x] = static_cast<int32_t>(best);
      }
    }
  }
}

void separable_filter_valid(int64_t planes, int64_t h, int64_t w, const float* taps, int64_t k, const float* input,
                            float* output) {
  const int64_t oh = h - k + 1;
  const int64_t ow = w - k + 1;
  for (int64_t p = 0; p < planes; ++p) {
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int64_t ty = 0; ty < k; ++ty) {
          for (int64_t tx = 0; tx < k; ++tx) {
            acc += static_cast<double>(taps[ty]) * taps[tx] * input[p * h * w + (y + ty) * w + x + tx];
          }
        }
        output[p * oh * ow + y * ow + x] = static_cast<float>(acc);
      }
    }
  }
}

}  // namespace gianet::kernels::reference

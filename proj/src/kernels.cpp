#define EIGEN_DONT_PARALLELIZE
#include "gianet/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "gianet/error.hpp"

namespace gianet::kernels {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Output columns per work item. Fixed so that the split (and therefore every
// summation order) is independent of the number of threads.
constexpr int64_t kBlockCols = 1024;

int64_t block_count(int64_t cols) { return (cols + kBlockCols - 1) / kBlockCols; }

// Gathers the receptive patches of output columns [col0, col0 + ncols) of
// one image into a (patch_size x ncols) matrix.
void im2col_block(const ConvGeometry& g, const float* image, int64_t col0, int64_t ncols, float* col) {
  const int64_t in_plane = g.in_h * g.in_w;
  for (int64_t ic = 0; ic < g.in_ch; ++ic) {
    const float* src = image + ic * in_plane;
    for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
      for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
        float* dst = col + ((ic * g.kernel_h + ky) * g.kernel_w + kx) * ncols;
        int64_t oy = col0 / g.out_w;
        int64_t ox = col0 % g.out_w;
        const int64_t dy = ky * g.dilation - g.pad_h;
        const int64_t dx = kx * g.dilation - g.pad_w;
        for (int64_t p = 0; p < ncols; ++p) {
          const int64_t iy = oy * g.stride_h + dy;
          const int64_t ix = ox * g.stride_w + dx;
          dst[p] = (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w) ? src[iy * g.in_w + ix] : 0.0F;
          if (++ox == g.out_w) {
            ox = 0;
            ++oy;
          }
        }
      }
    }
  }
}

void col2im_block(const ConvGeometry& g, const float* col, int64_t col0, int64_t ncols, float* image) {
  const int64_t in_plane = g.in_h * g.in_w;
  for (int64_t ic = 0; ic < g.in_ch; ++ic) {
    float* dst = image + ic * in_plane;
    for (int64_t ky = 0; ky < g.kernel_h; ++ky) {
      for (int64_t kx = 0; kx < g.kernel_w; ++kx) {
        const float* src = col + ((ic * g.kernel_h + ky) * g.kernel_w + kx) * ncols;
        int64_t oy = col0 / g.out_w;
        int64_t ox = col0 % g.out_w;
        const int64_t dy = ky * g.dilation - g.pad_h;
        const int64_t dx = kx * g.dilation - g.pad_w;
        for (int64_t p = 0; p < ncols; ++p) {
          const int64_t iy = oy * g.stride_h + dy;
          const int64_t ix = ox * g.stride_w + dx;
          if (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w) {
            dst[iy * g.in_w + ix] += src[p];
          }
          if (++ox == g.out_w) {
            ox = 0;
            ++oy;
          }
        }
      }
    }
  }
}

}  // namespace

ConvGeometry ConvGeometry::make(Shape input, int64_t out_ch, int64_t kernel_h, int64_t kernel_w, int64_t stride_h,
                                int64_t stride_w, int64_t dilation, int64_t pad_h, int64_t pad_w) {
  ConvGeometry g;
  g.batch = input.n;
  g.in_ch = input.c;
  g.in_h = input.h;
  g.in_w = input.w;
  g.out_ch = out_ch;
  g.kernel_h = kernel_h;
  g.kernel_w = kernel_w;
  g.stride_h = stride_h;
  g.stride_w = stride_w;
  g.dilation = dilation;
  g.pad_h = pad_h;
  g.pad_w = pad_w;
  const int64_t span_h = dilation * (kernel_h - 1) + 1;
  const int64_t span_w = dilation * (kernel_w - 1) + 1;
  if (stride_h < 1 || stride_w < 1 || dilation < 1) {
    throw ShapeError("conv2d: stride and dilation must be >= 1");
  }
  g.out_h = (input.h + 2 * pad_h - span_h) / stride_h + 1;
  g.out_w = (input.w + 2 * pad_w - span_w) / stride_w + 1;
  if (input.h + 2 * pad_h < span_h || input.w + 2 * pad_w < span_w || g.out_h <= 0 || g.out_w <= 0) {
    throw ShapeError("conv2d: kernel span exceeds padded input " + input.str());
  }
  return g;
}

void conv2d_forward(const ConvGeometry& g, const float* input, const float* weight, const float* bias, float* output) {
  const int64_t K = g.patch_size();
  const int64_t P = g.out_plane();
  const int64_t blocks = block_count(P);
  const ConstMap w(weight, g.out_ch, K);
  for (int64_t n = 0; n < g.batch; ++n) {
    const float* image = input + n * g.in_ch * g.in_h * g.in_w;
    float* out = output + n * g.out_ch * P;
#pragma omp parallel
    {
      std::vector<float> col;
#pragma omp for schedule(static)
      for (int64_t b = 0; b < blocks; ++b) {
        const int64_t c0 = b * kBlockCols;
        const int64_t nc = std::min(kBlockCols, P - c0);
        col.resize(static_cast<std::size_t>(K * nc));
        im2col_block(g, image, c0, nc, col.data());
        StridedMap y(out + c0, g.out_ch, nc, Eigen::OuterStride<>(P));
        y.noalias() = w * ConstMap(col.data(), K, nc);
        if (bias != nullptr) {
          for (int64_t oc = 0; oc < g.out_ch; ++oc) {
            y.row(oc).array() += bias[oc];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, const float* grad_output, const float* weight, float* grad_input) {
  const int64_t K = g.patch_size();
  const int64_t P = g.out_plane();
  const int64_t blocks = block_count(P);
  const ConstMap w(weight, g.out_ch, K);
  for (int64_t n = 0; n < g.batch; ++n) {
    const float* gout = grad_output + n * g.out_ch * P;
    float* gin = grad_input + n * g.in_ch * g.in_h * g.in_w;
#pragma omp parallel
    {
      std::vector<float> dcol;
#pragma omp for ordered schedule(static, 1)
      for (int64_t b = 0; b < blocks; ++b) {
        const int64_t c0 = b * kBlockCols;
        const int64_t nc = std::min(kBlockCols, P - c0);
        dcol.resize(static_cast<std::size_t>(K * nc));
        Map d(dcol.data(), K, nc);
        d.noalias() = w.transpose() * ConstStridedMap(gout + c0, g.out_ch, nc, Eigen::OuterStride<>(P));
        // Overlapping receptive fields: scatter in block order.
#pragma omp ordered
        col2im_block(g, dcol.data(), c0, nc, gin);
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, const float* input, const float* grad_output, float* grad_weight,
                            float* grad_bias) {
  const int64_t K = g.patch_size();
  const int64_t P = g.out_plane();
  const int64_t blocks = block_count(P);
  const int64_t items = blocks * g.batch;
  const auto wsize = static_cast<std::size_t>(g.out_ch * K);
  // One partial per (image, block); reduced below in a fixed order.
  std::vector<float> partial(static_cast<std::size_t>(items) * wsize);
#pragma omp parallel
  {
    std::vector<float> col;
#pragma omp for schedule(static)
    for (int64_t item = 0; item < items; ++item) {
      const int64_t n = item / blocks;
      const int64_t b = item % blocks;
      const int64_t c0 = b * kBlockCols;
      const int64_t nc = std::min(kBlockCols, P - c0);
      col.resize(static_cast<std::size_t>(K * nc));
      im2col_block(g, input + n * g.in_ch * g.in_h * g.in_w, c0, nc, col.data());
      Map dw(partial.data() + item * wsize, g.out_ch, K);
      dw.noalias() = ConstStridedMap(grad_output + n * g.out_ch * P + c0, g.out_ch, nc, Eigen::OuterStride<>(P)) *
                     ConstMap(col.data(), K, nc).transpose();
    }
  }
  for (int64_t item = 0; item < items; ++item) {
    const float* src = partial.data() + item * wsize;
    for (std::size_t i = 0; i < wsize; ++i) {
      grad_weight[i] += src[i];
    }
  }
  if (grad_bias != nullptr) {
#pragma omp parallel for schedule(static)
    for (int64_t oc = 0; oc < g.out_ch; ++oc) {
      double acc = 0.0;
      for (int64_t n = 0; n < g.batch; ++n) {
        const float* row = grad_output + (n * g.out_ch + oc) * P;
        for (int64_t p = 0; p < P; ++p) {
          acc += row[p];
        }
      }
      grad_bias[oc] += static_cast<float>(acc);
    }
  }
}

namespace {

// Weight slice for kernel tap (i, j) as an (out_ch x in_ch) matrix.
RowMat upsample_tap(const UpsampleGeometry& g, const float* weight, int64_t i, int64_t j) {
  RowMat m(g.out_ch, g.in_ch);
  for (int64_t ic = 0; ic < g.in_ch; ++ic) {
    for (int64_t oc = 0; oc < g.out_ch; ++oc) {
      m(oc, ic) = weight[((ic * g.out_ch + oc) * 2 + i) * 2 + j];
    }
  }
  return m;
}

}  // namespace

void conv_transpose2x2_forward(const UpsampleGeometry& g, const float* input, const float* weight, const float* bias,
                               float* output) {
  const int64_t P = g.in_h * g.in_w;
  const int64_t out_w = 2 * g.in_w;
  const int64_t out_plane = 4 * P;
  for (int64_t n = 0; n < g.batch; ++n) {
    const ConstMap x(input + n * g.in_ch * P, g.in_ch, P);
    float* out = output + n * g.out_ch * out_plane;
    for (int64_t i = 0; i < 2; ++i) {
      for (int64_t j = 0; j < 2; ++j) {
        const RowMat y = upsample_tap(g, weight, i, j) * x;
#pragma omp parallel for schedule(static)
        for (int64_t oc = 0; oc < g.out_ch; ++oc) {
          const float b = bias != nullptr ? bias[oc] : 0.0F;
          float* plane = out + oc * out_plane;
          for (int64_t yy = 0; yy < g.in_h; ++yy) {
            float* dst = plane + (2 * yy + i) * out_w + j;
            const float* src = y.data() + oc * P + yy * g.in_w;
            for (int64_t xx = 0; xx < g.in_w; ++xx) {
              dst[2 * xx] = src[xx] + b;
            }
          }
        }
      }
    }
  }
}

namespace {

// Strided sub-grid (i, j) of the upsampled gradient as an (out_ch x h*w) matrix.
RowMat gather_tap(const UpsampleGeometry& g, const float* grad_output_image, int64_t i, int64_t j) {
  const int64_t P = g.in_h * g.in_w;
  const int64_t out_w = 2 * g.in_w;
  RowMat m(g.out_ch, P);
#pragma omp parallel for schedule(static)
  for (int64_t oc = 0; oc < g.out_ch; ++oc) {
    const float* plane = grad_output_image + oc * 4 * P;
    for (int64_t yy = 0; yy < g.in_h; ++yy) {
      const float* src = plane + (2 * yy + i) * out_w + j;
      for (int64_t xx = 0; xx < g.in_w; ++xx) {
        m(oc, yy * g.in_w + xx) = src[2 * xx];
      }
    }
  }
  return m;
}

}  // namespace

void conv_transpose2x2_backward_input(const UpsampleGeometry& g, const float* grad_output, const float* weight,
                                      float* grad_input) {
  const int64_t P = g.in_h * g.in_w;
  for (int64_t n = 0; n < g.batch; ++n) {
    Map dx(grad_input + n * g.in_ch * P, g.in_ch, P);
    const float* gout = grad_output + n * g.out_ch * 4 * P;
    for (int64_t i = 0; i < 2; ++i) {
      for (int64_t j = 0; j < 2; ++j) {
        dx.noalias() += upsample_tap(g, weight, i, j).transpose() * gather_tap(g, gout, i, j);
      }
    }
  }
}

void conv_transpose2x2_backward_weight(const UpsampleGeometry& g, const float* input, const float* grad_output,
                                       float* grad_weight, float* grad_bias) {
  const int64_t P = g.in_h * g.in_w;
  for (int64_t n = 0; n < g.batch; ++n) {
    const ConstMap x(input + n * g.in_ch * P, g.in_ch, P);
    const float* gout = grad_output + n * g.out_ch * 4 * P;
    for (int64_t i = 0; i < 2; ++i) {
      for (int64_t j = 0; j < 2; ++j) {
        const RowMat dy = gather_tap(g, gout, i, j);
        const RowMat dw = dy * x.transpose();  // (out_ch x in_ch)
        for (int64_t ic = 0; ic < g.in_ch; ++ic) {
          for (int64_t oc = 0; oc < g.out_ch; ++oc) {
            grad_weight[((ic * g.out_ch + oc) * 2 + i) * 2 + j] += dw(oc, ic);
          }
        }
      }
    }
    if (grad_bias != nullptr) {
      for (int64_t oc = 0; oc < g.out_ch; ++oc) {
        const float* plane = gout + oc * 4 * P;
        double acc = 0.0;
        for (int64_t p = 0; p < 4 * P; ++p) {
          acc += plane[p];
        }
        grad_bias[oc] += static_cast<float>(acc);
      }
    }
  }
}

void maxpool2x2_forward(int64_t planes, int64_t h, int64_t w, const float* input, float* output, int32_t* argmax) {
  const int64_t oh = h / 2;
  const int64_t ow = w / 2;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const float* src = input + p * h * w;
    float* dst = output + p * oh * ow;
    int32_t* idx = argmax + p * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t x = 0; x < ow; ++x) {
        // Row-major window scan; strict > keeps the first maximum.
        int64_t best = (2 * y) * w + 2 * x;
        const int64_t cand[3] = {best + 1, best + w, best + w + 1};
        for (int64_t c : cand) {
          if (src[c] > src[best]) {
            best = c;
          }
        }
        dst[y * ow + x] = src[best];
        idx[y * ow + x] = static_cast<int32_t>(best);
      }
    }
  }
}

void maxpool2x2_backward(int64_t planes, int64_t h, int64_t w, const float* grad_output, const int32_t* argmax,
                         float* grad_input) {
  const int64_t out_plane = (h / 2) * (w / 2);
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    float* dst = grad_input + p * h * w;
    for (int64_t i = 0; i < out_plane; ++i) {
      dst[argmax[p * out_plane + i]] += grad_output[p * out_plane + i];
    }
  }
}

void separable_filter_valid(int64_t planes, int64_t h, int64_t w, const float* taps, int64_t k, const float* input,
                            float* output) {
  const int64_t oh = h - k + 1;
  const int64_t ow = w - k + 1;
#pragma omp parallel
  {
    std::vector<float> rows(static_cast<std::size_t>(h * ow));
#pragma omp for schedule(static)
    for (int64_t p = 0; p < planes; ++p) {
      const float* src = input + p * h * w;
      for (int64_t y = 0; y < h; ++y) {
        float* dst = rows.data() + y * ow;
        std::fill(dst, dst + ow, 0.0F);
        for (int64_t t = 0; t < k; ++t) {
          const float c = taps[t];
          const float* s = src + y * w + t;
          for (int64_t x = 0; x < ow; ++x) {
            dst[x] += c * s[x];
          }
        }
      }
      float* out = output + p * oh * ow;
      for (int64_t y = 0; y < oh; ++y) {
        float* dst = out + y * ow;
        std::fill(dst, dst + ow, 0.0F);
        for (int64_t t = 0; t < k; ++t) {
          const float c = taps[t];
          const float* s = rows.data() + (y + t) * ow;
          for (int64_t x = 0; x < ow; ++x) {
            dst[x] += c * s[x];
          }
        }
      }
    }
  }
}

void separable_filter_valid_backward(int64_t planes, int64_t h, int64_t w, const float* taps, int64_t k,
                                     const float* grad_output, float* grad_input) {
  const int64_t oh = h - k + 1;
  const int64_t ow = w - k + 1;
#pragma omp parallel
  {
    std::vector<float> rows(static_cast<std::size_t>(h * ow));
#pragma omp for schedule(static)
    for (int64_t p = 0; p < planes; ++p) {
      std::fill(rows.begin(), rows.end(), 0.0F);
      const float* gout = grad_output + p * oh * ow;
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t t = 0; t < k; ++t) {
          const float c = taps[t];
          float* dst = rows.data() + (y + t) * ow;
          const float* s = gout + y * ow;
          for (int64_t x = 0; x < ow; ++x) {
            dst[x] += c * s[x];
          }
        }
      }
      float* gin = grad_input + p * h * w;
      for (int64_t y = 0; y < h; ++y) {
        const float* s = rows.data() + y * ow;
        for (int64_t t = 0; t < k; ++t) {
          const float c = taps[t];
          float* dst = gin + y * w + t;
          for (int64_t x = 0; x < ow; ++x) {
            dst[x] += c * s[x];
          }
        }
      }
    }
  }
}

}  // namespace gianet::kernels

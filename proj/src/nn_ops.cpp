#include "gianet/nn_ops.hpp"

#include <algorithm>
#include <cmath>

#include "gianet/error.hpp"
#include "gianet/kernels.hpp"

namespace gianet::nn {

namespace {

using detail::grad_of;
using detail::make_result;

void require_defined(const char* op, const Tensor& x) {
  if (!x.defined()) {
    throw ShapeError(std::string(op) + ": undefined input");
  }
}

}  // namespace

Conv2dSpec Conv2dSpec::same(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t dilation, bool bias) {
  Conv2dSpec s;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel_h = kernel;
  s.kernel_w = kernel;
  s.dilation = dilation;
  s.bias = bias;
  return s;
}

Conv2dSpec Conv2dSpec::upsample2x(int64_t in_ch, int64_t out_ch, bool bias) {
  Conv2dSpec s;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel_h = 2;
  s.kernel_w = 2;
  s.stride_h = 2;
  s.stride_w = 2;
  s.same_padding = false;
  s.bias = bias;
  return s;
}

void Conv2dSpec::validate() const {
  if (in_ch < 1 || out_ch < 1 || kernel_h < 1 || kernel_w < 1) {
    throw ShapeError("conv2d: channels and kernel extents must be positive");
  }
  if (stride_h < 1 || stride_w < 1 || dilation < 1) {
    throw ShapeError("conv2d: stride and dilation must be >= 1");
  }
  if (same_padding) {
    if (kernel_h % 2 == 0 || kernel_w % 2 == 0) {
      throw ShapeError("conv2d: 'same' padding needs an odd kernel, got " + std::to_string(kernel_h) + "x" +
                       std::to_string(kernel_w));
    }
    if (stride_h != 1 || stride_w != 1) {
      throw ShapeError("conv2d: 'same' padding is defined for stride 1 only");
    }
  } else if (pad_h < 0 || pad_w < 0) {
    throw ShapeError("conv2d: negative padding");
  }
}

int64_t Conv2dSpec::effective_pad_h() const { return same_padding ? dilation * (kernel_h - 1) / 2 : pad_h; }

int64_t Conv2dSpec::effective_pad_w() const { return same_padding ? dilation * (kernel_w - 1) / 2 : pad_w; }

Tensor conv2d(const Tensor& x, const Conv2dSpec& spec, const Tensor& weight, const Tensor& bias) {
  require_defined("conv2d", x);
  spec.validate();
  const Shape in = x.shape();
  if (in.c != spec.in_ch) {
    throw ShapeError("conv2d: input has " + std::to_string(in.c) + " channels, spec expects " +
                     std::to_string(spec.in_ch));
  }
  const Shape wshape{spec.out_ch, spec.in_ch, spec.kernel_h, spec.kernel_w};
  if (weight.shape() != wshape) {
    throw ShapeError("conv2d: weight shape " + weight.shape().str() + " != " + wshape.str());
  }
  const bool has_bias = spec.bias && bias.defined();
  if (has_bias && bias.numel() != spec.out_ch) {
    throw ShapeError("conv2d: bias needs " + std::to_string(spec.out_ch) + " values");
  }
  const auto g = kernels::ConvGeometry::make(in, spec.out_ch, spec.kernel_h, spec.kernel_w, spec.stride_h,
                                             spec.stride_w, spec.dilation, spec.effective_pad_h(),
                                             spec.effective_pad_w());
  const Shape out_shape{in.n, spec.out_ch, g.out_h, g.out_w};
  std::vector<float> out(static_cast<std::size_t>(out_shape.numel()));
  kernels::conv2d_forward(g, x.data().data(), weight.data().data(), has_bias ? bias.data().data() : nullptr,
                          out.data());

  auto ix = x.impl();
  auto iw = weight.impl();
  auto ib = has_bias ? bias.impl() : nullptr;
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) {
    inputs.push_back(bias);
  }
  return make_result("conv2d", out_shape, std::move(out), inputs, [g, ix, iw, ib](std::span<const float> gout) {
    if (float* gx = grad_of(*ix)) {
      kernels::conv2d_backward_input(g, gout.data(), iw->data.data(), gx);
    }
    float* gw = grad_of(*iw);
    float* gb = ib ? grad_of(*ib) : nullptr;
    if (gw != nullptr) {
      kernels::conv2d_backward_weight(g, ix->data.data(), gout.data(), gw, gb);
    } else if (gb != nullptr) {
      const int64_t plane = g.out_plane();
      for (int64_t n = 0; n < g.batch; ++n) {
        for (int64_t oc = 0; oc < g.out_ch; ++oc) {
          double acc = 0.0;
          for (int64_t p = 0; p < plane; ++p) acc += gout[(n * g.out_ch + oc) * plane + p];
          gb[oc] += static_cast<float>(acc);
        }
      }
    }
  });
}

Tensor conv2d_transposed(const Tensor& x, const Conv2dSpec& spec, const Tensor& weight, const Tensor& bias) {
  require_defined("conv2d_transposed", x);
  if (spec.kernel_h != 2 || spec.kernel_w != 2 || spec.stride_h != 2 || spec.stride_w != 2 || spec.dilation != 1 ||
      spec.same_padding || spec.pad_h != 0 || spec.pad_w != 0) {
    throw ShapeError("conv2d_transposed: only stride-2 2x2 kernels without padding are supported");
  }
  const Shape in = x.shape();
  if (in.c != spec.in_ch) {
    throw ShapeError("conv2d_transposed: input has " + std::to_string(in.c) + " channels, spec expects " +
                     std::to_string(spec.in_ch));
  }
  const Shape wshape{spec.in_ch, spec.out_ch, 2, 2};
  if (weight.shape() != wshape) {
    throw ShapeError("conv2d_transposed: weight shape " + weight.shape().str() + " != " + wshape.str());
  }
  const bool has_bias = spec.bias && bias.defined();
  if (has_bias && bias.numel() != spec.out_ch) {
    throw ShapeError("conv2d_transposed: bias needs " + std::to_string(spec.out_ch) + " values");
  }
  const kernels::UpsampleGeometry g{in.n, spec.in_ch, spec.out_ch, in.h, in.w};
  const Shape out_shape{in.n, spec.out_ch, 2 * in.h, 2 * in.w};
  std::vector<float> out(static_cast<std::size_t>(out_shape.numel()));
  kernels::conv_transpose2x2_forward(g, x.data().data(), weight.data().data(),
                                     has_bias ? bias.data().data() : nullptr, out.data());
  auto ix = x.impl();
  auto iw = weight.impl();
  auto ib = has_bias ? bias.impl() : nullptr;
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) {
    inputs.push_back(bias);
  }
  return make_result("conv2d_transposed", out_shape, std::move(out), inputs,
                     [g, ix, iw, ib](std::span<const float> gout) {
                       if (float* gx = grad_of(*ix)) {
                         kernels::conv_transpose2x2_backward_input(g, gout.data(), iw->data.data(), gx);
                       }
                       float* gw = grad_of(*iw);
                       float* gb = ib ? grad_of(*ib) : nullptr;
                       if (gw != nullptr || gb != nullptr) {
                         std::vector<float> scratch;
                         if (gw == nullptr) {
                           scratch.assign(iw->data.size(), 0.0F);
                           gw = scratch.data();
                         }
                         kernels::conv_transpose2x2_backward_weight(g, ix->data.data(), gout.data(), gw, gb);
                       }
                     });
}

Tensor maxpool2x2(const Tensor& x) {
  require_defined("maxpool2x2", x);
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("maxpool2x2: spatial dims must be even and nonzero, got " + s.str());
  }
  const Shape out_shape{s.n, s.c, s.h / 2, s.w / 2};
  std::vector<float> out(static_cast<std::size_t>(out_shape.numel()));
  auto argmax = std::make_shared<std::vector<int32_t>>(out.size());
  kernels::maxpool2x2_forward(s.n * s.c, s.h, s.w, x.data().data(), out.data(), argmax->data());
  auto ix = x.impl();
  return make_result("maxpool2x2", out_shape, std::move(out), {x}, [ix, s, argmax](std::span<const float> gout) {
    if (float* gx = grad_of(*ix)) {
      kernels::maxpool2x2_backward(s.n * s.c, s.h, s.w, gout.data(), argmax->data(), gx);
    }
  });
}

Tensor avg_pool2x2(const Tensor& x) {
  require_defined("avg_pool2x2", x);
  const Shape s = x.shape();
  if (s.h < 2 || s.w < 2) {
    throw ShapeError("avg_pool2x2: spatial dims must be >= 2, got " + s.str());
  }
  const Shape out_shape{s.n, s.c, s.h / 2, s.w / 2};
  std::vector<float> out(static_cast<std::size_t>(out_shape.numel()));
  const float* src = x.data().data();
  const int64_t planes = s.n * s.c;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const float* in = src + p * s.plane();
    float* dst = out.data() + p * out_shape.plane();
    for (int64_t y = 0; y < out_shape.h; ++y) {
      for (int64_t xx = 0; xx < out_shape.w; ++xx) {
        const float* a = in + 2 * y * s.w + 2 * xx;
        dst[y * out_shape.w + xx] = 0.25F * (a[0] + a[1] + a[s.w] + a[s.w + 1]);
      }
    }
  }
  auto ix = x.impl();
  return make_result("avg_pool2x2", out_shape, std::move(out), {x}, [ix, s, out_shape](std::span<const float> gout) {
    float* gx = grad_of(*ix);
    if (gx == nullptr) return;
    const int64_t planes = s.n * s.c;
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < planes; ++p) {
      float* in = gx + p * s.plane();
      const float* g = gout.data() + p * out_shape.plane();
      for (int64_t y = 0; y < out_shape.h; ++y) {
        for (int64_t xx = 0; xx < out_shape.w; ++xx) {
          const float v = 0.25F * g[y * out_shape.w + xx];
          float* a = in + 2 * y * s.w + 2 * xx;
          a[0] += v;
          a[1] += v;
          a[s.w] += v;
          a[s.w + 1] += v;
        }
      }
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_defined("global_avg_pool", x);
  const Shape s = x.shape();
  if (s.h < 1 || s.w < 1) {
    throw ShapeError("global_avg_pool: empty spatial extent " + s.str());
  }
  const Shape out_shape{s.n, s.c, 1, 1};
  std::vector<float> out(static_cast<std::size_t>(out_shape.numel()));
  const float* src = x.data().data();
  const int64_t planes = s.n * s.c;
  const int64_t area = s.plane();
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    double acc = 0.0;
    for (int64_t i = 0; i < area; ++i) acc += src[p * area + i];
    out[p] = static_cast<float>(acc / static_cast<double>(area));
  }
  auto ix = x.impl();
  return make_result("global_avg_pool", out_shape, std::move(out), {x}, [ix, planes, area](std::span<const float> g) {
    float* gx = grad_of(*ix);
    if (gx == nullptr) return;
    const float inv = 1.0F / static_cast<float>(area);
    for (int64_t p = 0; p < planes; ++p) {
      const float v = g[p] * inv;
      for (int64_t i = 0; i < area; ++i) gx[p * area + i] += v;
    }
  });
}

namespace {

struct LerpTap {
  int64_t lo;
  int64_t hi;
  float frac;
};

std::vector<LerpTap> lerp_taps(int64_t in, int64_t out) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::max(src, 0.0);
    auto lo = static_cast<int64_t>(std::floor(src));
    lo = std::min(lo, in - 1);
    const int64_t hi = std::min(lo + 1, in - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, static_cast<float>(src - static_cast<double>(lo))};
  }
  return taps;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, int64_t out_h, int64_t out_w) {
  require_defined("bilinear_upsample", x);
  const Shape s = x.shape();
  if (out_h < s.h || out_w < s.w) {
    throw ShapeError("bilinear_upsample: target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                     " is smaller than source " + s.str());
  }
  const Shape out_shape{s.n, s.c, out_h, out_w};
  const auto ty = lerp_taps(s.h, out_h);
  const auto tx = lerp_taps(s.w, out_w);
  std::vector<float> out(static_cast<std::size_t>(out_shape.numel()));
  const float* src = x.data().data();
  const int64_t planes = s.n * s.c;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const float* in = src + p * s.plane();
    float* dst = out.data() + p * out_shape.plane();
    for (int64_t y = 0; y < out_h; ++y) {
      const auto& a = ty[static_cast<std::size_t>(y)];
      for (int64_t xx = 0; xx < out_w; ++xx) {
        const auto& b = tx[static_cast<std::size_t>(xx)];
        const float tl = in[a.lo * s.w + b.lo];
        const float bl = in[a.hi * s.w + b.lo];
        const float top = tl + (in[a.lo * s.w + b.hi] - tl) * b.frac;
        const float bot = bl + (in[a.hi * s.w + b.hi] - bl) * b.frac;
        dst[y * out_w + xx] = top + (bot - top) * a.frac;
      }
    }
  }
  auto ix = x.impl();
  return make_result("bilinear_upsample", out_shape, std::move(out), {x},
                     [ix, s, out_shape, ty, tx](std::span<const float> g) {
                       float* gx = grad_of(*ix);
                       if (gx == nullptr) return;
                       const int64_t planes = s.n * s.c;
#pragma omp parallel for schedule(static)
                       for (int64_t p = 0; p < planes; ++p) {
                         float* in = gx + p * s.plane();
                         const float* go = g.data() + p * out_shape.plane();
                         for (int64_t y = 0; y < out_shape.h; ++y) {
                           const auto& a = ty[static_cast<std::size_t>(y)];
                           for (int64_t xx = 0; xx < out_shape.w; ++xx) {
                             const auto& b = tx[static_cast<std::size_t>(xx)];
                             const float v = go[y * out_shape.w + xx];
                             in[a.lo * s.w + b.lo] += v * (1.0F - a.frac) * (1.0F - b.frac);
                             in[a.lo * s.w + b.hi] += v * (1.0F - a.frac) * b.frac;
                             in[a.hi * s.w + b.lo] += v * a.frac * (1.0F - b.frac);
                             in[a.hi * s.w + b.hi] += v * a.frac * b.frac;
                           }
                         }
                       }
                     });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) { return concat_channels(std::vector<Tensor>{a, b}); }

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw ShapeError("concat_channels: no inputs");
  }
  const Shape first = parts.front().shape();
  int64_t channels = 0;
  for (const auto& t : parts) {
    require_defined("concat_channels", t);
    const Shape s = t.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " does not align with " + first.str());
    }
    channels += s.c;
  }
  const Shape out_shape{first.n, channels, first.h, first.w};
  const int64_t plane = first.plane();
  std::vector<float> out(static_cast<std::size_t>(out_shape.numel()));
  std::vector<std::shared_ptr<detail::TensorImpl>> impls;
  int64_t offset = 0;
  for (const auto& t : parts) {
    const int64_t c = t.shape().c;
    for (int64_t n = 0; n < first.n; ++n) {
      const float* from = t.data().data() + n * c * plane;
      std::copy(from, from + c * plane, out.data() + (n * channels + offset) * plane);
    }
    offset += c;
    impls.push_back(t.impl());
  }
  return make_result("concat_channels", out_shape, std::move(out), parts,
                     [impls, channels, plane, batch = first.n](std::span<const float> g) {
                       int64_t off = 0;
                       for (const auto& impl : impls) {
                         const int64_t c = impl->shape.c;
                         if (float* gi = grad_of(*impl)) {
                           for (int64_t n = 0; n < batch; ++n) {
                             const float* from = g.data() + (n * channels + off) * plane;
                             float* to = gi + n * c * plane;
                             for (int64_t i = 0; i < c * plane; ++i) to[i] += from[i];
                           }
                         }
                         off += c;
                       }
                     });
}

namespace {

// Index of the depth-to-space source element for output (n, c, y, x).
inline int64_t d2s_source(const Shape& in, int64_t r, int64_t n, int64_t c, int64_t y, int64_t x) {
  const int64_t ic = c * r * r + (y % r) * r + (x % r);
  return ((n * in.c + ic) * in.h + y / r) * in.w + x / r;
}

}  // namespace

Tensor depth_to_space(const Tensor& x, int64_t r) {
  require_defined("depth_to_space", x);
  const Shape s = x.shape();
  if (r < 1 || s.c % (r * r) != 0) {
    throw ShapeError("depth_to_space: " + std::to_string(s.c) + " channels not divisible by r^2 = " +
                     std::to_string(r * r));
  }
  const Shape out_shape{s.n, s.c / (r * r), s.h * r, s.w * r};
  std::vector<int64_t> index(static_cast<std::size_t>(out_shape.numel()));
  std::size_t k = 0;
  for (int64_t n = 0; n < out_shape.n; ++n)
    for (int64_t c = 0; c < out_shape.c; ++c)
      for (int64_t y = 0; y < out_shape.h; ++y)
        for (int64_t xx = 0; xx < out_shape.w; ++xx) index[k++] = d2s_source(s, r, n, c, y, xx);
  std::vector<float> out(index.size());
  const float* src = x.data().data();
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = src[index[i]];
  auto ix = x.impl();
  return make_result("depth_to_space", out_shape, std::move(out), {x},
                     [ix, index = std::move(index)](std::span<const float> g) {
                       if (float* gx = grad_of(*ix)) {
                         for (std::size_t i = 0; i < index.size(); ++i) gx[index[i]] += g[i];
                       }
                     });
}

Tensor space_to_depth(const Tensor& x, int64_t r) {
  require_defined("space_to_depth", x);
  const Shape s = x.shape();
  if (r < 1 || s.h % r != 0 || s.w % r != 0) {
    throw ShapeError("space_to_depth: spatial dims of " + s.str() + " not divisible by " + std::to_string(r));
  }
  const Shape out_shape{s.n, s.c * r * r, s.h / r, s.w / r};
  // out[d2s_source(out_shape, ...)] = in[(n, c, y, x)]
  std::vector<int64_t> index(static_cast<std::size_t>(out_shape.numel()));
  std::size_t k = 0;
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t y = 0; y < s.h; ++y)
        for (int64_t xx = 0; xx < s.w; ++xx) index[static_cast<std::size_t>(d2s_source(out_shape, r, n, c, y, xx))] =
            static_cast<int64_t>(k++);
  std::vector<float> out(index.size());
  const float* src = x.data().data();
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = src[index[i]];
  auto ix = x.impl();
  return make_result("space_to_depth", out_shape, std::move(out), {x},
                     [ix, index = std::move(index)](std::span<const float> g) {
                       if (float* gx = grad_of(*ix)) {
                         for (std::size_t i = 0; i < index.size(); ++i) gx[index[i]] += g[i];
                       }
                     });
}

Tensor leaky_relu(const Tensor& x, float slope) {
  require_defined("leaky_relu", x);
  if (!(slope >= 0.0F && slope < 1.0F)) {
    throw ShapeError("leaky_relu: slope must lie in [0, 1)");
  }
  auto src = x.data();
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    out[i] = src[i] >= 0.0F ? src[i] : slope * src[i];
  }
  auto ix = x.impl();
  return make_result("leaky_relu", x.shape(), std::move(out), {x}, [ix, slope](std::span<const float> g) {
    if (float* gx = grad_of(*ix)) {
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += ix->data[i] >= 0.0F ? g[i] : slope * g[i];
    }
  });
}

Tensor separable_filter_valid(const Tensor& x, std::span<const float> taps) {
  require_defined("separable_filter_valid", x);
  const Shape s = x.shape();
  const auto k = static_cast<int64_t>(taps.size());
  if (k < 1 || s.h < k || s.w < k) {
    throw ShapeError("separable_filter_valid: " + std::to_string(k) + "-tap window exceeds " + s.str());
  }
  const Shape out_shape{s.n, s.c, s.h - k + 1, s.w - k + 1};
  std::vector<float> out(static_cast<std::size_t>(out_shape.numel()));
  kernels::separable_filter_valid(s.n * s.c, s.h, s.w, taps.data(), k, x.data().data(), out.data());
  auto ix = x.impl();
  std::vector<float> t(taps.begin(), taps.end());
  return make_result("separable_filter_valid", out_shape, std::move(out), {x},
                     [ix, s, t = std::move(t)](std::span<const float> g) {
                       if (float* gx = grad_of(*ix)) {
                         kernels::separable_filter_valid_backward(s.n * s.c, s.h, s.w, t.data(),
                                                                  static_cast<int64_t>(t.size()), g.data(), gx);
                       }
                     });
}

}  // namespace gianet::nn

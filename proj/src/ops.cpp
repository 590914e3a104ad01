#include "gianet/ops.hpp"

#include <cmath>

#include "gianet/error.hpp"

namespace gianet {

namespace {

using detail::grad_of;
using detail::make_result;

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined()) {
    throw ShapeError(std::string(op) + ": undefined operand");
  }
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

template <typename F>
std::vector<float> map1(const Tensor& a, F f) {
  auto src = a.data();
  std::vector<float> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    out[i] = f(src[i]);
  }
  return out;
}

template <typename F>
std::vector<float> map2(const Tensor& a, const Tensor& b, F f) {
  auto x = a.data();
  auto y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = f(x[i], y[i]);
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  auto ia = a.impl();
  auto ib = b.impl();
  return make_result("add", a.shape(), map2(a, b, [](float x, float y) { return x + y; }), {a, b},
                     [ia, ib](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (float* gb = grad_of(*ib)) {
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  auto ia = a.impl();
  auto ib = b.impl();
  return make_result("sub", a.shape(), map2(a, b, [](float x, float y) { return x - y; }), {a, b},
                     [ia, ib](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (float* gb = grad_of(*ib)) {
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  auto ia = a.impl();
  auto ib = b.impl();
  return make_result("mul", a.shape(), map2(a, b, [](float x, float y) { return x * y; }), {a, b},
                     [ia, ib](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * ib->data[i];
                       }
                       if (float* gb = grad_of(*ib)) {
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ia->data[i];
                       }
                     });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same("div", a, b);
  auto ia = a.impl();
  auto ib = b.impl();
  return make_result("div", a.shape(), map2(a, b, [](float x, float y) { return x / y; }), {a, b},
                     [ia, ib](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / ib->data[i];
                       }
                       if (float* gb = grad_of(*ib)) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           const float y = ib->data[i];
                           gb[i] -= g[i] * ia->data[i] / (y * y);
                         }
                       }
                     });
}

Tensor scalar_mul(const Tensor& a, float s) {
  auto ia = a.impl();
  return make_result("scalar_mul", a.shape(), map1(a, [s](float x) { return x * s; }), {a},
                     [ia, s](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
                       }
                     });
}

Tensor add_scalar(const Tensor& a, float s) {
  auto ia = a.impl();
  return make_result("add_scalar", a.shape(), map1(a, [s](float x) { return x + s; }), {a},
                     [ia](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                     });
}

Tensor neg(const Tensor& a) { return scalar_mul(a, -1.0F); }

Tensor square(const Tensor& a) {
  auto ia = a.impl();
  return make_result("square", a.shape(), map1(a, [](float x) { return x * x; }), {a},
                     [ia](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0F * ia->data[i] * g[i];
                       }
                     });
}

Tensor abs(const Tensor& a) {
  auto ia = a.impl();
  return make_result("abs", a.shape(), map1(a, [](float x) { return std::fabs(x); }), {a},
                     [ia](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           const float x = ia->data[i];
                           ga[i] += x > 0.0F ? g[i] : (x < 0.0F ? -g[i] : 0.0F);
                         }
                       }
                     });
}

Tensor clamp_min(const Tensor& a, float lo) {
  auto ia = a.impl();
  return make_result("clamp_min", a.shape(), map1(a, [lo](float x) { return x > lo ? x : lo; }), {a},
                     [ia, lo](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           if (ia->data[i] > lo) ga[i] += g[i];
                         }
                       }
                     });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.data()) {
    acc += v;
  }
  auto ia = a.impl();
  return make_result("sum", Shape{1, 1, 1, 1}, {static_cast<float>(acc)}, {a}, [ia](std::span<const float> g) {
    if (float* ga = grad_of(*ia)) {
      for (std::size_t i = 0; i < ia->data.size(); ++i) ga[i] += g[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  const auto count = a.numel();
  if (count == 0) {
    throw ShapeError("mean of an empty tensor");
  }
  double acc = 0.0;
  for (float v : a.data()) {
    acc += v;
  }
  auto ia = a.impl();
  const float inv = 1.0F / static_cast<float>(count);
  return make_result("mean", Shape{1, 1, 1, 1}, {static_cast<float>(acc / static_cast<double>(count))}, {a},
                     [ia, inv](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         const float step = g[0] * inv;
                         for (std::size_t i = 0; i < ia->data.size(); ++i) ga[i] += step;
                       }
                     });
}

Tensor slice_channels(const Tensor& a, int64_t begin, int64_t end) {
  const Shape s = a.shape();
  if (begin < 0 || end > s.c || begin >= end) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + s.str());
  }
  const Shape out_shape{s.n, end - begin, s.h, s.w};
  const int64_t plane = s.plane();
  std::vector<float> out(static_cast<std::size_t>(out_shape.numel()));
  auto src = a.data();
  for (int64_t n = 0; n < s.n; ++n) {
    const float* from = src.data() + (n * s.c + begin) * plane;
    std::copy(from, from + out_shape.c * plane, out.data() + n * out_shape.c * plane);
  }
  auto ia = a.impl();
  return make_result("slice_channels", out_shape, std::move(out), {a},
                     [ia, s, out_shape, begin, plane](std::span<const float> g) {
                       if (float* ga = grad_of(*ia)) {
                         for (int64_t n = 0; n < s.n; ++n) {
                           float* to = ga + (n * s.c + begin) * plane;
                           const float* from = g.data() + n * out_shape.c * plane;
                           for (int64_t i = 0; i < out_shape.c * plane; ++i) to[i] += from[i];
                         }
                       }
                     });
}

}  // namespace gianet

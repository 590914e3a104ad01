#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>

#include "gianet/cost.hpp"
#include "gianet/error.hpp"
#include "gianet/kernels.hpp"
#include "gianet/nn_ops.hpp"
#include "gianet/ops.hpp"
#include "testing.hpp"

namespace gianet::nn {
namespace {

using testing::grad_check;
using testing::project;
using testing::random_tensor;

// Direct convolution oracle written independently of the library kernels.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int64_t stride, int64_t dil, int64_t pad) {
  const Shape s = x.shape();
  const Shape ws = w.shape();
  const int64_t oh = (s.h + 2 * pad - dil * (ws.h - 1) - 1) / stride + 1;
  const int64_t ow = (s.w + 2 * pad - dil * (ws.w - 1) - 1) / stride + 1;
  Tensor out(Shape{s.n, ws.n, oh, ow});
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t o = 0; o < ws.n; ++o)
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t xx = 0; xx < ow; ++xx) {
          double acc = b.defined() ? b.data()[static_cast<std::size_t>(o)] : 0.0;
          for (int64_t c = 0; c < s.c; ++c)
            for (int64_t ky = 0; ky < ws.h; ++ky)
              for (int64_t kx = 0; kx < ws.w; ++kx) {
                const int64_t iy = y * stride - pad + ky * dil;
                const int64_t ix = xx * stride - pad + kx * dil;
                if (iy < 0 || ix < 0 || iy >= s.h || ix >= s.w) continue;
                acc += static_cast<double>(x.at(n, c, iy, ix)) * w.at(o, c, ky, kx);
              }
          out.at(n, o, y, xx) = static_cast<float>(acc);
        }
  return out;
}

void expect_close(const Tensor& a, const Tensor& b, float tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.data().size(); ++i) ASSERT_NEAR(a.data()[i], b.data()[i], tol) << "element " << i;
}

TEST(Conv2d, IdentityOneByOne) {
  const Tensor x = random_tensor(Shape{1, 3, 5, 5}, 1);
  Tensor w(Shape{3, 3, 1, 1});
  for (int i = 0; i < 3; ++i) w.at(i, i, 0, 0) = 1.0F;
  const auto spec = Conv2dSpec::same(3, 3, 1);
  const Tensor y = conv2d(x, spec, w, Tensor(Shape{1, 3, 1, 1}));
  EXPECT_TRUE(testing::same_bits(y.data(), x.data()));
}

TEST(Conv2d, ParamCountClosedForm) { EXPECT_EQ(Conv2dSpec::same(4, 32, 3).param_count(), 1184); }

TEST(Conv2d, DilatedSamePadding) {
  const auto spec = Conv2dSpec::same(2, 3, 3, 2);
  EXPECT_EQ(spec.effective_pad_h(), 2);
  EXPECT_EQ(spec.effective_pad_w(), 2);
  EXPECT_EQ(spec.receptive_field(), 5);
  const Tensor y = conv2d(random_tensor(Shape{1, 2, 7, 9}, 2), spec, random_tensor(Shape{3, 2, 3, 3}, 3));
  EXPECT_EQ(y.shape(), (Shape{1, 3, 7, 9}));
}

TEST(Conv2d, Errors) {
  const Tensor x = random_tensor(Shape{1, 2, 6, 6}, 4);
  EXPECT_THROW(conv2d(x, Conv2dSpec::same(3, 2, 3), random_tensor(Shape{2, 3, 3, 3}, 5)), ShapeError);
  EXPECT_THROW(Conv2dSpec::same(2, 2, 2).validate(), ShapeError);
}

TEST(Conv2d, MatchesDirectOracle) {
  for (const auto& [stride, dil, pad, k] : std::vector<std::tuple<int64_t, int64_t, int64_t, int64_t>>{
           {1, 1, 1, 3}, {1, 2, 2, 3}, {2, 1, 0, 2}, {1, 1, 0, 1}, {2, 1, 1, 3}}) {
    Conv2dSpec spec;
    spec.in_ch = 3;
    spec.out_ch = 4;
    spec.kernel_h = spec.kernel_w = k;
    spec.stride_h = spec.stride_w = stride;
    spec.dilation = dil;
    spec.same_padding = false;
    spec.pad_h = spec.pad_w = pad;
    const Tensor x = random_tensor(Shape{2, 3, 9, 8}, 6);
    const Tensor w = random_tensor(Shape{4, 3, k, k}, 7);
    const Tensor b = random_tensor(Shape{1, 4, 1, 1}, 8);
    expect_close(conv2d(x, spec, w, b), naive_conv(x, w, b, stride, dil, pad), 1e-5F);
  }
}

TEST(Conv2d, GradientCheck) {
  const auto spec = Conv2dSpec::same(2, 3, 3, 1);
  const auto r = grad_check([&](const std::vector<Tensor>& in) { return project(conv2d(in[0], spec, in[1], in[2])); },
                            {random_tensor(Shape{1, 2, 4, 4}, 9), random_tensor(Shape{3, 2, 3, 3}, 10),
                             random_tensor(Shape{1, 3, 1, 1}, 11)});
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst;
}

TEST(Conv2d, DilatedGradientCheck) {
  const auto spec = Conv2dSpec::same(2, 2, 3, 2);
  const auto r = grad_check([&](const std::vector<Tensor>& in) { return project(conv2d(in[0], spec, in[1], in[2])); },
                            {random_tensor(Shape{1, 2, 4, 4}, 12), random_tensor(Shape{2, 2, 3, 3}, 13),
                             random_tensor(Shape{1, 2, 1, 1}, 14)});
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst;
}

TEST(ConvTransposed, ShapeDoublesAndZeroWeights) {
  const auto spec = Conv2dSpec::upsample2x(2, 5, true);
  const Tensor x = random_tensor(Shape{1, 2, 3, 3}, 15);
  Tensor bias(Shape{1, 5, 1, 1}, 0.25F);
  const Tensor y = conv2d_transposed(x, spec, Tensor(Shape{2, 5, 2, 2}), bias);
  EXPECT_EQ(y.shape(), (Shape{1, 5, 6, 6}));
  for (float v : y.data()) EXPECT_EQ(v, 0.25F);
}

TEST(ConvTransposed, RejectsOtherGeometries) {
  auto spec = Conv2dSpec::upsample2x(2, 2);
  spec.stride_h = spec.stride_w = 1;
  EXPECT_THROW(conv2d_transposed(random_tensor(Shape{1, 2, 3, 3}, 16), spec, Tensor(Shape{2, 2, 2, 2})), ShapeError);
}

TEST(ConvTransposed, AdjointOfStridedConv) {
  // <conv_T(x), y> = <x, conv(y)> with the same weights.
  const Tensor x = random_tensor(Shape{2, 3, 4, 5}, 17);
  const Tensor y = random_tensor(Shape{2, 4, 8, 10}, 18);
  const Tensor w = random_tensor(Shape{3, 4, 2, 2}, 19);  // (in, out, 2, 2) for the transposed op
  const Tensor up = conv2d_transposed(x, Conv2dSpec::upsample2x(3, 4), w);
  Conv2dSpec down;
  down.in_ch = 4;
  down.out_ch = 3;
  down.kernel_h = down.kernel_w = 2;
  down.stride_h = down.stride_w = 2;
  down.same_padding = false;
  down.bias = false;
  // conv weight (out=3, in=4, 2, 2) is the same buffer read as (3, 4, 2, 2).
  const Tensor conv_y = conv2d(y, down, Tensor(Shape{3, 4, 2, 2}, std::vector<float>(w.data().begin(), w.data().end())));
  const double lhs = sum(up * y).item();
  const double rhs = sum(x * conv_y).item();
  EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs)));
}

TEST(ConvTransposed, GradientCheck) {
  const auto spec = Conv2dSpec::upsample2x(3, 2, true);
  const auto r = grad_check(
      [&](const std::vector<Tensor>& in) { return project(conv2d_transposed(in[0], spec, in[1], in[2])); },
      {random_tensor(Shape{1, 3, 3, 3}, 20), random_tensor(Shape{3, 2, 2, 2}, 21), random_tensor(Shape{1, 2, 1, 1}, 22)});
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst;
}

TEST(Kernels, BlockedMatchesReference) {
  for (const auto& [h, w, stride, dil] :
       std::vector<std::tuple<int64_t, int64_t, int64_t, int64_t>>{{40, 40, 1, 1}, {33, 47, 1, 2}, {20, 18, 2, 1}}) {
    const Shape in{2, 5, h, w};
    const auto g = kernels::ConvGeometry::make(in, 6, 3, 3, stride, stride, dil, dil, dil);
    const Tensor x = random_tensor(in, 23);
    const Tensor wt = random_tensor(Shape{6, 5, 3, 3}, 24);
    const Tensor b = random_tensor(Shape{1, 6, 1, 1}, 25);
    const Tensor go = random_tensor(Shape{2, 6, g.out_h, g.out_w}, 26);
    std::vector<float> y1(static_cast<std::size_t>(2 * 6 * g.out_plane()));
    std::vector<float> y2 = y1;
    kernels::conv2d_forward(g, x.data().data(), wt.data().data(), b.data().data(), y1.data());
    kernels::reference::conv2d_forward(g, x.data().data(), wt.data().data(), b.data().data(), y2.data());
    for (std::size_t i = 0; i < y1.size(); ++i) ASSERT_NEAR(y1[i], y2[i], 1e-4) << i;

    std::vector<float> gi1(static_cast<std::size_t>(in.numel()));
    std::vector<float> gi2 = gi1;
    kernels::conv2d_backward_input(g, go.data().data(), wt.data().data(), gi1.data());
    kernels::reference::conv2d_backward_input(g, go.data().data(), wt.data().data(), gi2.data());
    for (std::size_t i = 0; i < gi1.size(); ++i) ASSERT_NEAR(gi1[i], gi2[i], 1e-4) << i;

    std::vector<float> gw1(6 * 5 * 9);
    std::vector<float> gw2 = gw1;
    std::vector<float> gb1(6);
    std::vector<float> gb2(6);
    kernels::conv2d_backward_weight(g, x.data().data(), go.data().data(), gw1.data(), gb1.data());
    kernels::reference::conv2d_backward_weight(g, x.data().data(), go.data().data(), gw2.data(), gb2.data());
    for (std::size_t i = 0; i < gw1.size(); ++i) ASSERT_NEAR(gw1[i], gw2[i], 1e-3) << i;
    for (std::size_t i = 0; i < gb1.size(); ++i) ASSERT_NEAR(gb1[i], gb2[i], 1e-3) << i;
  }
}

TEST(Kernels, ResultsIndependentOfThreadCount) {
  const Shape in{1, 8, 64, 64};
  const auto g = kernels::ConvGeometry::make(in, 8, 3, 3, 1, 1, 1, 1, 1);
  const Tensor x = random_tensor(in, 27);
  const Tensor wt = random_tensor(Shape{8, 8, 3, 3}, 28);
  const Tensor go = random_tensor(Shape{1, 8, 64, 64}, 29);
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    std::vector<float> y(static_cast<std::size_t>(8 * g.out_plane()));
    std::vector<float> gi(static_cast<std::size_t>(in.numel()));
    std::vector<float> gw(8 * 8 * 9);
    kernels::conv2d_forward(g, x.data().data(), wt.data().data(), nullptr, y.data());
    kernels::conv2d_backward_input(g, go.data().data(), wt.data().data(), gi.data());
    kernels::conv2d_backward_weight(g, x.data().data(), go.data().data(), gw.data(), nullptr);
    y.insert(y.end(), gi.begin(), gi.end());
    y.insert(y.end(), gw.begin(), gw.end());
    return y;
  };
  const int before = omp_get_max_threads();
  const auto one = run(1);
  const auto four = run(4);
  omp_set_num_threads(before);
  EXPECT_TRUE(testing::same_bits(one, four));
}

TEST(Kernels, TransposedMatchesReference) {
  const kernels::UpsampleGeometry g{2, 3, 4, 5, 6};
  const Tensor x = random_tensor(Shape{2, 3, 5, 6}, 30);
  const Tensor w = random_tensor(Shape{3, 4, 2, 2}, 31);
  const Tensor b = random_tensor(Shape{1, 4, 1, 1}, 32);
  std::vector<float> y1(2 * 4 * 10 * 12);
  std::vector<float> y2 = y1;
  kernels::conv_transpose2x2_forward(g, x.data().data(), w.data().data(), b.data().data(), y1.data());
  kernels::reference::conv_transpose2x2_forward(g, x.data().data(), w.data().data(), b.data().data(), y2.data());
  for (std::size_t i = 0; i < y1.size(); ++i) ASSERT_NEAR(y1[i], y2[i], 1e-5) << i;
}

TEST(MaxPool, Examples) {
  const Tensor x(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  EXPECT_EQ(maxpool2x2(x).item(), 4.0F);

  Tensor c = Tensor::leaf(Shape{1, 1, 4, 4}, std::vector<float>(16, 0.5F));
  const Tensor y = maxpool2x2(c);
  for (float v : y.data()) EXPECT_EQ(v, 0.5F);
  sum(y).backward();
  for (int64_t i = 0; i < 4; ++i)
    for (int64_t j = 0; j < 4; ++j) EXPECT_EQ(c.grad()[static_cast<std::size_t>(i * 4 + j)], (i % 2 == 0 && j % 2 == 0) ? 1.0F : 0.0F);
}

TEST(MaxPool, MatchesWindowScan) {
  const Tensor x = random_tensor(Shape{2, 3, 8, 8}, 33);
  const Tensor y = maxpool2x2(x);
  std::vector<float> oracle(static_cast<std::size_t>(2 * 3 * 16));
  std::vector<float> ref(oracle.size());
  kernels::reference::maxpool2x2_forward(6, 8, 8, x.data().data(), ref.data(), nullptr);
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < 4; ++i)
        for (int64_t j = 0; j < 4; ++j) {
          float m = -INFINITY;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) m = std::max(m, x.at(n, c, 2 * i + dy, 2 * j + dx));
          EXPECT_EQ(y.at(n, c, i, j), m);
          EXPECT_EQ(ref[static_cast<std::size_t>(((n * 3 + c) * 4 + i) * 4 + j)], m);
        }
}

TEST(MaxPool, OddDimsRejected) { EXPECT_THROW(maxpool2x2(Tensor(Shape{1, 1, 3, 4})), ShapeError); }

TEST(MaxPool, GradientCheck) {
  // Values on a coarse lattice so the probe step never reorders a window.
  Tensor x(Shape{1, 2, 4, 4});
  std::vector<float> v(32);
  for (int i = 0; i < 32; ++i) v[static_cast<std::size_t>(i)] = static_cast<float>((i * 7) % 32) * 0.1F;
  std::copy(v.begin(), v.end(), x.data().begin());
  const auto r = grad_check([](const std::vector<Tensor>& in) { return project(maxpool2x2(in[0])); }, {x}, 1e-3);
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst;
}

TEST(AvgPool, ValuesAndGradient) {
  const Tensor x(Shape{1, 1, 3, 3}, std::vector<float>{1, 2, 9, 3, 4, 9, 9, 9, 9});
  const Tensor y = avg_pool2x2(x);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y.item(), 2.5F);
  const auto r = grad_check([](const std::vector<Tensor>& in) { return project(avg_pool2x2(in[0])); },
                            {random_tensor(Shape{1, 2, 4, 5}, 34)});
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst;
}

TEST(GlobalAvgPool, Examples) {
  EXPECT_FLOAT_EQ(global_avg_pool(Tensor(Shape{1, 1, 3, 5}, 0.7F)).item(), 0.7F);
  EXPECT_FLOAT_EQ(global_avg_pool(Tensor(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4})).item(), 2.5F);
  EXPECT_EQ(global_avg_pool(Tensor(Shape{2, 512, 16, 16})).shape(), (Shape{2, 512, 1, 1}));
  Tensor x = Tensor::leaf(Shape{1, 1, 2, 3}, std::vector<float>(6, 1.0F));
  sum(global_avg_pool(x)).backward();
  for (float g : x.grad()) EXPECT_FLOAT_EQ(g, 1.0F / 6.0F);
  const auto r = grad_check([](const std::vector<Tensor>& in) { return project(global_avg_pool(in[0])); },
                            {random_tensor(Shape{2, 3, 4, 4}, 35)});
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst;
}

TEST(Bilinear, BroadcastFromOnePixel) {
  const Tensor y = bilinear_upsample(Tensor(Shape{1, 2, 1, 1}, 0.7F), 5, 3);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 5, 3}));
  for (float v : y.data()) EXPECT_EQ(v, 0.7F);
}

TEST(Bilinear, HalfPixelWeights) {
  const Tensor x(Shape{1, 1, 2, 2}, std::vector<float>{0, 1, 0, 1});
  const Tensor y = bilinear_upsample(x, 4, 4);
  const float expected[4] = {0.0F, 0.25F, 0.75F, 1.0F};
  for (int64_t r = 0; r < 4; ++r)
    for (int64_t c = 0; c < 4; ++c) EXPECT_FLOAT_EQ(y.at(0, 0, r, c), expected[c]);
}

TEST(Bilinear, SameSizeIsIdentityAndShrinkFails) {
  const Tensor x = random_tensor(Shape{1, 2, 3, 4}, 36);
  EXPECT_TRUE(testing::same_bits(bilinear_upsample(x, 3, 4).data(), x.data()));
  EXPECT_THROW(bilinear_upsample(x, 2, 4), ShapeError);
}

TEST(Bilinear, GradientCheck) {
  const auto r = grad_check([](const std::vector<Tensor>& in) { return project(bilinear_upsample(in[0], 7, 5)); },
                            {random_tensor(Shape{1, 2, 3, 2}, 37)});
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst;
}

TEST(Concat, ShapesAndRoundTrip) {
  const Tensor a = random_tensor(Shape{1, 2, 4, 4}, 38);
  const Tensor b = random_tensor(Shape{1, 3, 4, 4}, 39);
  const Tensor c = concat_channels(a, b);
  EXPECT_EQ(c.shape(), (Shape{1, 5, 4, 4}));
  EXPECT_TRUE(testing::same_bits(slice_channels(c, 0, 2).data(), a.data()));
  EXPECT_TRUE(testing::same_bits(slice_channels(c, 2, 5).data(), b.data()));
  EXPECT_EQ(concat_channels(Tensor(Shape{1, 512, 16, 16}), Tensor(Shape{1, 256, 16, 16})).shape(),
            (Shape{1, 768, 16, 16}));
  EXPECT_THROW(concat_channels(a, Tensor(Shape{1, 1, 4, 5})), ShapeError);
  const auto r = grad_check([](const std::vector<Tensor>& in) { return project(concat_channels(in[0], in[1])); },
                            {a, b});
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst;
}

TEST(DepthToSpace, ShapesAndInverse) {
  EXPECT_EQ(depth_to_space(Tensor(Shape{1, 12, 4, 4}), 2).shape(), (Shape{1, 3, 8, 8}));
  EXPECT_EQ(depth_to_space(Tensor(Shape{1, 27, 2, 2}), 3).shape(), (Shape{1, 3, 6, 6}));
  EXPECT_THROW(depth_to_space(Tensor(Shape{1, 10, 2, 2}), 2), ShapeError);
  const Tensor x = random_tensor(Shape{2, 3, 6, 6}, 40);
  EXPECT_TRUE(testing::same_bits(depth_to_space(space_to_depth(x, 3), 3).data(), x.data()));
  const Tensor z = random_tensor(Shape{1, 8, 2, 3}, 41);
  EXPECT_TRUE(testing::same_bits(space_to_depth(depth_to_space(z, 2), 2).data(), z.data()));
}

TEST(DepthToSpace, SubPixelOrder) {
  Tensor x(Shape{1, 4, 1, 1}, std::vector<float>{0, 1, 2, 3});
  const Tensor y = depth_to_space(x, 2);
  EXPECT_EQ(y.at(0, 0, 0, 0), 0);
  EXPECT_EQ(y.at(0, 0, 0, 1), 1);
  EXPECT_EQ(y.at(0, 0, 1, 0), 2);
  EXPECT_EQ(y.at(0, 0, 1, 1), 3);
  const auto r = grad_check([](const std::vector<Tensor>& in) { return project(depth_to_space(in[0], 2)); },
                            {random_tensor(Shape{1, 8, 2, 2}, 42)});
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst;
}

TEST(LeakyRelu, ValuesAndGradient) {
  Tensor x = Tensor::leaf(Shape{1, 1, 1, 3}, {-1.0F, 0.0F, 2.0F});
  const Tensor y = leaky_relu(x, 0.2F);
  EXPECT_FLOAT_EQ(y.data()[0], -0.2F);
  EXPECT_EQ(y.data()[1], 0.0F);
  EXPECT_EQ(y.data()[2], 2.0F);
  sum(y).backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 0.2F);
  EXPECT_EQ(x.grad()[1], 1.0F);
  EXPECT_EQ(x.grad()[2], 1.0F);
  EXPECT_THROW(leaky_relu(x, 1.0F), Error);

  // Away from zero the finite-difference check holds tightly.
  Tensor away = random_tensor(Shape{1, 2, 4, 4}, 43);
  for (auto& v : away.data()) v = v < 0 ? v - 0.1F : v + 0.1F;
  const auto r = grad_check([](const std::vector<Tensor>& in) { return project(leaky_relu(in[0])); }, {away}, 1e-2);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(SeparableFilter, MatchesReferenceAndGradient) {
  const std::vector<float> taps{0.25F, 0.5F, 0.25F};
  const Tensor x = random_tensor(Shape{1, 2, 6, 7}, 44);
  const Tensor y = separable_filter_valid(x, taps);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 4, 5}));
  std::vector<float> ref(static_cast<std::size_t>(y.numel()));
  kernels::reference::separable_filter_valid(2, 6, 7, taps.data(), 3, x.data().data(), ref.data());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-6);
  const auto r = grad_check(
      [&](const std::vector<Tensor>& in) { return project(separable_filter_valid(in[0], taps)); }, {x});
  EXPECT_LT(r.max_rel_error, 1e-2) << r.worst;
}

TEST(Cost, SingleConvClosedForm) {
  const auto spec = Conv2dSpec::same(4, 4, 1);
  EXPECT_EQ(spec.param_count(), 20);
  EXPECT_EQ(conv_flops(spec, 2, 2), 144);
}

TEST(Cost, ConvFlopsScaleWithArea) {
  const auto spec = Conv2dSpec::same(8, 16, 3, 1, false);
  EXPECT_EQ(conv_flops(spec, 20, 30) * 4, conv_flops(spec, 40, 60));
}

TEST(Cost, ParseResolution) {
  const auto r = parse_resolution("4240x2832");
  EXPECT_EQ(r.width, 4240);
  EXPECT_EQ(r.height, 2832);
  EXPECT_THROW(parse_resolution("4240"), ConfigError);
  EXPECT_THROW(parse_resolution("0x10"), ConfigError);
}

}  // namespace
}  // namespace gianet::nn

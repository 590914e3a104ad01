#include "gianet/losses.hpp"

#include <cmath>
#include <limits>

#include "gianet/error.hpp"
#include "gianet/nn_ops.hpp"
#include "gianet/ops.hpp"

namespace gianet::losses {

namespace {

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

void SsimParams::validate() const {
  if (window < 1 || window % 2 == 0) throw ConfigError("ssim: window must be odd and positive");
  if (!(sigma > 0.0F)) throw ConfigError("ssim: sigma must be positive");
  if (levels < 1) throw ConfigError("ssim: levels must be >= 1");
  if (!(c1() > 0.0F) || !(c2() > 0.0F)) throw ConfigError("ssim: stabilizing constants must be positive");
}

std::vector<float> gaussian_taps(int window, float sigma) {
  std::vector<double> w(static_cast<std::size_t>(window));
  const double centre = (window - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - centre;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * static_cast<double>(sigma) * sigma));
    total += w[static_cast<std::size_t>(i)];
  }
  std::vector<float> taps(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) taps[i] = static_cast<float>(w[i] / total);
  return taps;
}

Tensor l1_loss(const Tensor& out, const Tensor& target) {
  require_same("l1_loss", out, target);
  return mean(abs(out - target));
}

SsimMaps ssim_maps(const Tensor& x, const Tensor& y, const SsimParams& params) {
  require_same("ssim", x, y);
  params.validate();
  const Shape s = x.shape();
  if (s.h < params.window || s.w < params.window) {
    throw ShapeError("ssim: image " + s.str() + " is smaller than the " + std::to_string(params.window) +
                     "-pixel window");
  }
  const auto taps = gaussian_taps(params.window, params.sigma);
  auto blur = [&](const Tensor& t) { return nn::separable_filter_valid(t, taps); };
  const Tensor mu_x = blur(x);
  const Tensor mu_y = blur(y);
  const Tensor mu_xx = mu_x * mu_x;
  const Tensor mu_yy = mu_y * mu_y;
  const Tensor mu_xy = mu_x * mu_y;
  const Tensor var_x = blur(x * x) - mu_xx;
  const Tensor var_y = blur(y * y) - mu_yy;
  const Tensor cov = blur(x * y) - mu_xy;
  const float c1 = params.c1();
  const float c2 = params.c2();
  Tensor l = (mu_xy * 2.0F + c1) / (mu_xx + mu_yy + c1);
  Tensor cs = (cov * 2.0F + c2) / (var_x + var_y + c2);
  return {std::move(l), std::move(cs)};
}

Tensor ssim(const Tensor& x, const Tensor& y, const SsimParams& params) {
  const SsimMaps maps = ssim_maps(x, y, params);
  return mean(maps.luminance * maps.contrast_structure);
}

Tensor ms_ssim(const Tensor& x, const Tensor& y, const SsimParams& params) {
  require_same("ms_ssim", x, y);
  params.validate();
  const Shape s = x.shape();
  if (std::min(s.h, s.w) < params.min_side()) {
    throw ShapeError("ms_ssim: " + std::to_string(params.levels) + " levels need a side of at least " +
                     std::to_string(params.min_side()) + ", got " + s.str());
  }
  Tensor a = x;
  Tensor b = y;
  Tensor product;
  for (int level = 1; level <= params.levels; ++level) {
    const SsimMaps maps = ssim_maps(a, b, params);
    Tensor cs = clamp_min(mean(maps.contrast_structure), params.factor_floor);
    product = product.defined() ? product * cs : cs;
    if (level == params.levels) {
      product = product * clamp_min(mean(maps.luminance), params.factor_floor);
    } else {
      a = nn::avg_pool2x2(a);
      b = nn::avg_pool2x2(b);
    }
  }
  return product;
}

float combine_terms(float gamma, float l1_term, float msssim_term) {
  return gamma * l1_term + (1.0F - gamma) * msssim_term;
}

LossReport joint_loss(const Tensor& out, const Tensor& target, float gamma, const SsimParams& params) {
  if (!(gamma >= 0.0F && gamma <= 1.0F)) throw ConfigError("joint_loss: gamma must lie in [0, 1]");
  const Tensor l1 = l1_loss(out, target);
  const Tensor ms_loss = add_scalar(neg(ms_ssim(out, target, params)), 1.0F);
  LossReport report;
  report.gamma = gamma;
  report.total = l1 * gamma + ms_loss * (1.0F - gamma);
  report.l1_term = l1.item();
  report.msssim_term = ms_loss.item();
  report.total_value = report.total.item();
  return report;
}

double psnr(const Tensor& out, const Tensor& target, double max_val) {
  require_same("psnr", out, target);
  auto a = out.data();
  auto b = target.data();
  if (a.empty()) throw ShapeError("psnr: empty images");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(max_val) - 10.0 * std::log10(mse);
}

}  // namespace gianet::losses

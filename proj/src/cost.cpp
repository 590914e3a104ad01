#include "gianet/cost.hpp"

#include <cstdio>
#include <sstream>

#include "gianet/error.hpp"

namespace gianet::nn {

int64_t conv_flops(const Conv2dSpec& spec, int64_t out_h, int64_t out_w) {
  const int64_t outputs = out_h * out_w * spec.out_ch;
  return 2 * spec.kernel_h * spec.kernel_w * spec.in_ch * outputs + (spec.bias ? outputs : 0);
}

int64_t conv_transposed_flops(const Conv2dSpec& spec, int64_t out_h, int64_t out_w) {
  // Non-overlapping stride == kernel: each output sums in_ch products.
  const int64_t outputs = out_h * out_w * spec.out_ch;
  return 2 * spec.in_ch * outputs + (spec.bias ? outputs : 0);
}

Resolution parse_resolution(const std::string& text) {
  const auto x = text.find_first_of("xX");
  Resolution r;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used_w = 0;
    std::size_t used_h = 0;
    r.width = std::stoll(text.substr(0, x), &used_w);
    r.height = std::stoll(text.substr(x + 1), &used_h);
    if (used_w != x || used_h != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError("resolution must look like WIDTHxHEIGHT, got '" + text + "'");
  }
  if (r.width < 1 || r.height < 1) throw ConfigError("resolution must be positive, got '" + text + "'");
  return r;
}

CostReport cost_report(const models::ArchConfig& config, Resolution raw) {
  const int64_t r = config.out_factor;
  if (raw.width < 1 || raw.height < 1 || raw.width % r != 0 || raw.height % r != 0) {
    throw ConfigError("resolution " + std::to_string(raw.width) + "x" + std::to_string(raw.height) +
                      " is not divisible by the packing factor " + std::to_string(r));
  }
  std::vector<int64_t> level_h{raw.height / r};
  std::vector<int64_t> level_w{raw.width / r};
  for (int64_t k = 1; k < config.depth; ++k) {
    level_h.push_back((level_h.back() + 1) / 2);
    level_w.push_back((level_w.back() + 1) / 2);
  }
  auto area = [&](int64_t level) -> int64_t {
    if (level < 0) return 1;
    return level_h[static_cast<std::size_t>(level)] * level_w[static_cast<std::size_t>(level)];
  };

  CostReport report;
  for (const auto& layer : models::layer_plan(config)) {
    LayerCost cost{layer.name, 0, 0};
    const int64_t elems = area(layer.level) * layer.channels;
    switch (layer.op) {
      case models::LayerOp::Conv: {
        cost.params = layer.conv.param_count();
        const int64_t h = layer.level < 0 ? 1 : level_h[static_cast<std::size_t>(layer.level)];
        const int64_t w = layer.level < 0 ? 1 : level_w[static_cast<std::size_t>(layer.level)];
        cost.flops = conv_flops(layer.conv, h, w);
        break;
      }
      case models::LayerOp::UpConv:
        cost.params = layer.conv.param_count();
        cost.flops = conv_transposed_flops(layer.conv, level_h[static_cast<std::size_t>(layer.level)],
                                           level_w[static_cast<std::size_t>(layer.level)]);
        break;
      case models::LayerOp::GlobalPool:
        cost.flops = area(config.depth - 1) * layer.channels;
        break;
      case models::LayerOp::MaxPool:
      case models::LayerOp::Upsample:
      case models::LayerOp::Activation:
        cost.flops = elems;
        break;
      case models::LayerOp::Concat:
      case models::LayerOp::DepthToSpace:
        break;
    }
    report.params += cost.params;
    report.flops += cost.flops;
    report.layers.push_back(std::move(cost));
  }
  return report;
}

int64_t count_params(const models::ArchConfig& config) {
  int64_t total = 0;
  for (const auto& layer : models::layer_plan(config)) {
    if (layer.op == models::LayerOp::Conv || layer.op == models::LayerOp::UpConv) total += layer.conv.param_count();
  }
  return total;
}

int64_t count_flops(const models::ArchConfig& config, Resolution raw) { return cost_report(config, raw).flops; }

std::string CostReport::table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %14s %18s %18s\n", "layer", "params", "flops", "cumulative_flops");
  os << line;
  int64_t cumulative = 0;
  for (const auto& l : layers) {
    cumulative += l.flops;
    std::snprintf(line, sizeof line, "%-24s %14lld %18lld %18lld\n", l.name.c_str(), static_cast<long long>(l.params),
                  static_cast<long long>(l.flops), static_cast<long long>(cumulative));
    os << line;
  }
  std::snprintf(line, sizeof line, "%-24s %14lld %18lld %18lld\n", "total", static_cast<long long>(params),
                static_cast<long long>(flops), static_cast<long long>(flops));
  os << line;
  return os.str();
}

}  // namespace gianet::nn

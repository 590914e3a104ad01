#include "gianet/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "gianet/error.hpp"
#include "gianet/keyvalue.hpp"
#include "gianet/ops.hpp"

namespace gianet::models {

namespace {

std::string enc_name(int64_t level, int i) { return "enc" + std::to_string(level) + ".conv" + std::to_string(i); }
std::string dec_name(int64_t level, int i) { return "dec" + std::to_string(level) + ".conv" + std::to_string(i); }
std::string up_name(int64_t level) { return "dec" + std::to_string(level) + ".up"; }

const char* block_text(BlockKind k) {
  switch (k) {
    case BlockKind::Plain:
      return "plain";
    case BlockKind::Dilated:
      return "dilated";
    case BlockKind::SeeWider:
      return "sw";
  }
  return "plain";
}

const char* bottleneck_text(BottleneckKind k) {
  switch (k) {
    case BottleneckKind::None:
      return "none";
    case BottleneckKind::Gia:
      return "gia";
    case BottleneckKind::ExtraConvs:
      return "extra";
  }
  return "none";
}

// Local and wide channel split of a see-wider block of `out` channels.
std::pair<int64_t, int64_t> sw_split(const ArchConfig& c, int64_t out) {
  const auto local = static_cast<int64_t>(std::llround(static_cast<double>(out) * c.sw_local_fraction));
  return {local, out - local};
}

void add_block(const ArchConfig& c, std::vector<PlannedLayer>& plan, const std::string& name, int64_t in,
               int64_t out, int64_t level) {
  if (c.block == BlockKind::SeeWider) {
    const auto [local, wide] = sw_split(c, out);
    plan.push_back({name + ".local", LayerOp::Conv, nn::Conv2dSpec::same(in, local, 3, 1), level, local});
    plan.push_back({name + ".local.act", LayerOp::Activation, {}, level, local});
    plan.push_back({name + ".wide", LayerOp::Conv, nn::Conv2dSpec::same(in, wide, 3, c.dilation), level, wide});
    plan.push_back({name + ".wide.act", LayerOp::Activation, {}, level, wide});
    plan.push_back({name + ".concat", LayerOp::Concat, {}, level, out});
    return;
  }
  const int64_t d = c.block == BlockKind::Dilated ? c.dilation : 1;
  plan.push_back({name, LayerOp::Conv, nn::Conv2dSpec::same(in, out, 3, d), level, out});
  plan.push_back({name + ".act", LayerOp::Activation, {}, level, out});
}

uint64_t name_seed(uint64_t seed, std::string_view name) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char ch : name) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  uint64_t z = h ^ (seed + 0x9E3779B97F4A7C15ULL);  // splitmix finalizer
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

void ArchConfig::validate() const {
  if (in_ch < 1) throw ConfigError("arch: in_ch must be positive");
  if (base_width < 1) throw ConfigError("arch: base_width must be positive");
  if (depth < 1 || depth > 12) throw ConfigError("arch: depth must lie in [1, 12]");
  if (!(width_scale > 0.0) || width(0) < 1) throw ConfigError("arch: width_scale leaves no channels");
  if (dilation < 1) throw ConfigError("arch: dilation must be >= 1");
  if (out_factor < 1) throw ConfigError("arch: out_factor must be >= 1");
  if (!(slope >= 0.0F && slope < 1.0F)) throw ConfigError("arch: slope must lie in [0, 1)");
  if (block == BlockKind::SeeWider) {
    for (int64_t k = 0; k < depth; ++k) {
      const auto [local, wide] = sw_split(*this, width(k));
      if (local < 1 || wide < 1) {
        throw ConfigError("arch: see-wider split leaves an empty branch at width " + std::to_string(width(k)));
      }
    }
  }
  if (bottleneck == BottleneckKind::Gia) {
    const GiaSpec g = resolved_gia();
    if (g.c1 < 1 || g.c2 < 1) throw ConfigError("arch: GIA channel counts must be positive");
  }
  if (bottleneck == BottleneckKind::ExtraConvs && extra_convs < 1) {
    throw ConfigError("arch: extra bottleneck convs must be >= 1");
  }
}

int64_t ArchConfig::width(int64_t level) const {
  const auto base = static_cast<int64_t>(std::llround(static_cast<double>(base_width) * width_scale));
  return base << level;
}

GiaSpec ArchConfig::resolved_gia() const {
  const int64_t c = bottleneck_width();
  return GiaSpec{gia.c1 > 0 ? gia.c1 : std::max<int64_t>(1, c / 2), gia.c2 > 0 ? gia.c2 : c};
}

int64_t ArchConfig::bottleneck_out_width() const {
  return bottleneck == BottleneckKind::Gia ? resolved_gia().c2 : bottleneck_width();
}

std::string ArchConfig::to_text() const {
  std::ostringstream os;
  os << "in_ch = " << in_ch << '\n'
     << "base_width = " << base_width << '\n'
     << "depth = " << depth << '\n'
     << "width_scale = " << kv::exact_real(width_scale) << '\n'
     << "block = " << block_text(block) << '\n'
     << "dilation = " << dilation << '\n'
     << "sw_local_fraction = " << kv::exact_real(sw_local_fraction) << '\n'
     << "bottleneck = " << bottleneck_text(bottleneck) << '\n'
     << "gia_c1 = " << gia.c1 << '\n'
     << "gia_c2 = " << gia.c2 << '\n'
     << "extra_convs = " << extra_convs << '\n'
     << "out_factor = " << out_factor << '\n'
     << "slope = " << kv::exact_real(slope) << '\n';
  return os.str();
}

ArchConfig ArchConfig::from_text(std::string_view text) {
  ArchConfig c;
  for (const auto& [key, value] : kv::parse(text)) {
    if (key == "in_ch") {
      c.in_ch = kv::parse_int(key, value);
    } else if (key == "base_width") {
      c.base_width = kv::parse_int(key, value);
    } else if (key == "depth") {
      c.depth = kv::parse_int(key, value);
    } else if (key == "width_scale") {
      c.width_scale = kv::parse_real(key, value);
    } else if (key == "block") {
      if (value == "plain") {
        c.block = BlockKind::Plain;
      } else if (value == "dilated") {
        c.block = BlockKind::Dilated;
      } else if (value == "sw") {
        c.block = BlockKind::SeeWider;
      } else {
        throw ConfigError("config: unknown block kind '" + value + "'");
      }
    } else if (key == "dilation") {
      c.dilation = kv::parse_int(key, value);
    } else if (key == "sw_local_fraction") {
      c.sw_local_fraction = kv::parse_real(key, value);
    } else if (key == "bottleneck") {
      if (value == "none") {
        c.bottleneck = BottleneckKind::None;
      } else if (value == "gia") {
        c.bottleneck = BottleneckKind::Gia;
      } else if (value == "extra") {
        c.bottleneck = BottleneckKind::ExtraConvs;
      } else {
        throw ConfigError("config: bottleneck must be one of none|gia|extra, got '" + value + "'");
      }
    } else if (key == "gia_c1") {
      c.gia.c1 = kv::parse_int(key, value);
    } else if (key == "gia_c2") {
      c.gia.c2 = kv::parse_int(key, value);
    } else if (key == "extra_convs") {
      c.extra_convs = kv::parse_int(key, value);
    } else if (key == "out_factor") {
      c.out_factor = kv::parse_int(key, value);
    } else if (key == "slope") {
      c.slope = static_cast<float>(kv::parse_real(key, value));
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"sid", "sid-dilated", "sw", "gia", "gia-l1", "sid-extra"};
  return names;
}

int64_t packing_factor(int64_t in_ch) {
  if (in_ch == 4) return 2;
  if (in_ch == 9) return 3;
  throw ConfigError("in_ch must be 4 (Bayer) or 9 (X-Trans), got " + std::to_string(in_ch));
}

ArchConfig variant(std::string_view name, int64_t in_ch) {
  ArchConfig c;
  c.in_ch = in_ch;
  c.out_factor = packing_factor(in_ch);
  if (name == "sid") {
  } else if (name == "sid-dilated") {
    c.block = BlockKind::Dilated;
  } else if (name == "sw") {
    c.block = BlockKind::SeeWider;
  } else if (name == "gia" || name == "gia-l1") {
    c.bottleneck = BottleneckKind::Gia;
  } else if (name == "sid-extra") {
    c.bottleneck = BottleneckKind::ExtraConvs;
  } else {
    throw ConfigError("unknown variant '" + std::string(name) + "'");
  }
  c.validate();
  return c;
}

ArchConfig desk_preset(std::string_view name, int64_t in_ch) {
  ArchConfig c = variant(name, in_ch);
  c.width_scale = 0.25;
  c.depth = 4;
  c.validate();
  return c;
}

std::vector<PlannedLayer> layer_plan(const ArchConfig& c) {
  c.validate();
  std::vector<PlannedLayer> plan;
  for (int64_t k = 0; k < c.depth; ++k) {
    if (k > 0) {
      plan.push_back({"enc" + std::to_string(k) + ".pool", LayerOp::MaxPool, {}, k, c.width(k - 1)});
    }
    add_block(c, plan, enc_name(k, 1), k == 0 ? c.in_ch : c.width(k - 1), c.width(k), k);
    add_block(c, plan, enc_name(k, 2), c.width(k), c.width(k), k);
  }
  const int64_t bottom = c.depth - 1;
  const int64_t cb = c.bottleneck_width();
  if (c.bottleneck == BottleneckKind::ExtraConvs) {
    for (int64_t i = 1; i <= c.extra_convs; ++i) {
      const std::string name = "bottleneck.extra" + std::to_string(i);
      plan.push_back({name, LayerOp::Conv, nn::Conv2dSpec::same(cb, cb, 3), bottom, cb});
      plan.push_back({name + ".act", LayerOp::Activation, {}, bottom, cb});
    }
  } else if (c.bottleneck == BottleneckKind::Gia) {
    const GiaSpec g = c.resolved_gia();
    plan.push_back({"gia.pool", LayerOp::GlobalPool, {}, -1, cb});
    plan.push_back({"gia.shrink", LayerOp::Conv, nn::Conv2dSpec::same(cb, g.c1, 1), -1, g.c1});
    plan.push_back({"gia.shrink.act", LayerOp::Activation, {}, -1, g.c1});
    plan.push_back({"gia.upsample", LayerOp::Upsample, {}, bottom, g.c1});
    plan.push_back({"gia.concat", LayerOp::Concat, {}, bottom, cb + g.c1});
    plan.push_back({"gia.fuse", LayerOp::Conv, nn::Conv2dSpec::same(cb + g.c1, g.c2, 1), bottom, g.c2});
    plan.push_back({"gia.fuse.act", LayerOp::Activation, {}, bottom, g.c2});
  }
  int64_t prev = c.bottleneck_out_width();
  for (int64_t k = c.depth - 2; k >= 0; --k) {
    const int64_t w = c.width(k);
    plan.push_back({up_name(k), LayerOp::UpConv, nn::Conv2dSpec::upsample2x(prev, w, false), k, w});
    plan.push_back({"dec" + std::to_string(k) + ".concat", LayerOp::Concat, {}, k, 2 * w});
    add_block(c, plan, dec_name(k, 1), 2 * w, w, k);
    add_block(c, plan, dec_name(k, 2), w, w, k);
    prev = w;
  }
  plan.push_back({"head", LayerOp::Conv, nn::Conv2dSpec::same(c.width(0), c.head_channels(), 1), 0,
                  c.head_channels()});
  plan.push_back({"head.depth_to_space", LayerOp::DepthToSpace, {}, 0, 3});
  return plan;
}

std::vector<std::pair<std::string, ReceptiveField>> receptive_field_trace(const ArchConfig& c) {
  c.validate();
  std::vector<std::pair<std::string, ReceptiveField>> trace;
  ReceptiveField rf;
  auto conv = [&](const std::string& name, int64_t kernel, int64_t dilation) {
    const int64_t span = 1 + dilation * (kernel - 1);
    rf.start -= (span - 1) / 2 * rf.jump;
    rf.size += (span - 1) * rf.jump;
    trace.emplace_back(name, rf);
  };
  // A see-wider block's extent is that of its wider (dilated) branch.
  const int64_t block_dilation = c.block == BlockKind::Plain ? 1 : c.dilation;
  for (int64_t k = 0; k < c.depth; ++k) {
    if (k > 0) {
      rf.size += rf.jump;
      rf.jump *= 2;
      trace.emplace_back("enc" + std::to_string(k) + ".pool", rf);
    }
    conv(enc_name(k, 1), 3, block_dilation);
    conv(enc_name(k, 2), 3, block_dilation);
  }
  if (c.bottleneck == BottleneckKind::ExtraConvs) {
    for (int64_t i = 1; i <= c.extra_convs; ++i) conv("bottleneck.extra" + std::to_string(i), 3, 1);
  } else if (c.bottleneck == BottleneckKind::Gia) {
    rf.global = true;
    trace.emplace_back("gia.fuse", rf);
  }
  return trace;
}

ReceptiveField bottleneck_receptive_field(const ArchConfig& c) { return receptive_field_trace(c).back().second; }

Tensor Conv::operator()(const Tensor& x) const {
  return transposed ? nn::conv2d_transposed(x, spec, weight, bias) : nn::conv2d(x, spec, weight, bias);
}

Conv make_conv(const nn::Conv2dSpec& spec, uint64_t seed, std::string_view name, bool transposed) {
  Conv conv;
  conv.spec = spec;
  conv.transposed = transposed;
  const Shape wshape = transposed ? Shape{spec.in_ch, spec.out_ch, spec.kernel_h, spec.kernel_w}
                                  : Shape{spec.out_ch, spec.in_ch, spec.kernel_h, spec.kernel_w};
  // Each output of a 2x2/stride-2 transposed conv sums in_ch inputs.
  const int64_t fan_in = transposed ? spec.in_ch : spec.in_ch * spec.kernel_h * spec.kernel_w;
  const float sigma = std::sqrt(2.0F / static_cast<float>(fan_in));
  std::mt19937_64 rng(name_seed(seed, name));
  std::normal_distribution<float> normal(0.0F, 1.0F);
  std::vector<float> w(static_cast<std::size_t>(wshape.numel()));
  for (auto& v : w) {
    float z = normal(rng);
    while (std::fabs(z) > 2.0F) z = normal(rng);
    v = sigma * z;
  }
  conv.weight = Tensor::leaf(wshape, std::move(w));
  if (spec.bias) {
    conv.bias = Tensor::leaf(Shape{1, spec.out_ch, 1, 1}, std::vector<float>(static_cast<std::size_t>(spec.out_ch)));
  }
  return conv;
}

GiaModule GiaModule::create(int64_t channels, GiaSpec spec, uint64_t seed, std::string_view name) {
  if (spec.c1 < 1 || spec.c2 < 1) throw ConfigError("GIA channel counts must be positive");
  const std::string base(name);
  return GiaModule{make_conv(nn::Conv2dSpec::same(channels, spec.c1, 1), seed, base + ".shrink"),
                   make_conv(nn::Conv2dSpec::same(channels + spec.c1, spec.c2, 1), seed, base + ".fuse")};
}

Tensor GiaModule::forward(const Tensor& x, float slope, Tensor* global_branch) const {
  const Shape s = x.shape();
  Tensor pooled = nn::global_avg_pool(x);
  Tensor context = nn::leaky_relu(shrink(pooled), slope);
  Tensor broadcast = nn::bilinear_upsample(context, s.h, s.w);
  if (global_branch != nullptr) *global_branch = broadcast;
  return nn::leaky_relu(fuse(nn::concat_channels(x, broadcast)), slope);
}

SwBlock SwBlock::create(int64_t in_ch, int64_t c_local, int64_t c_wide, int64_t dilation, uint64_t seed,
                        std::string_view name) {
  const std::string base(name);
  return SwBlock{make_conv(nn::Conv2dSpec::same(in_ch, c_local, 3, 1), seed, base + ".local"),
                 make_conv(nn::Conv2dSpec::same(in_ch, c_wide, 3, dilation), seed, base + ".wide")};
}

Tensor SwBlock::forward(const Tensor& x, float slope) const {
  return nn::concat_channels(nn::leaky_relu(local(x), slope), nn::leaky_relu(wide(x), slope));
}

Network::Network(ArchConfig config, uint64_t seed) : config_(std::move(config)) {
  for (const auto& layer : layer_plan(config_)) {
    if (layer.op != LayerOp::Conv && layer.op != LayerOp::UpConv) continue;
    order_.push_back(layer.name);
    layers_.emplace(layer.name, make_conv(layer.conv, seed, layer.name, layer.op == LayerOp::UpConv));
  }
}

const Conv& Network::layer(const std::string& name) const {
  const auto it = layers_.find(name);
  if (it == layers_.end()) throw ConfigError("network has no layer '" + name + "'");
  return it->second;
}

Tensor Network::block(const std::string& name, const Tensor& x) const {
  if (config_.block == BlockKind::SeeWider) {
    return SwBlock{layer(name + ".local"), layer(name + ".wide")}.forward(x, config_.slope);
  }
  return nn::leaky_relu(layer(name)(x), config_.slope);
}

Tensor Network::forward(const Tensor& packed, ForwardTrace* trace) const {
  const Shape s = packed.shape();
  if (s.c != config_.in_ch) {
    throw ShapeError("network expects " + std::to_string(config_.in_ch) + " input channels, got " + s.str());
  }
  const int64_t m = config_.spatial_multiple();
  if (s.h % m != 0 || s.w % m != 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("packed input " + s.str() + " must have spatial dims divisible by " + std::to_string(m));
  }
  std::vector<Tensor> skips;
  Tensor x = packed;
  for (int64_t k = 0; k < config_.depth; ++k) {
    if (k > 0) x = nn::maxpool2x2(x);
    x = block(enc_name(k, 1), x);
    x = block(enc_name(k, 2), x);
    if (k + 1 < config_.depth) skips.push_back(x);
  }
  if (config_.bottleneck == BottleneckKind::ExtraConvs) {
    for (int64_t i = 1; i <= config_.extra_convs; ++i) {
      x = nn::leaky_relu(layer("bottleneck.extra" + std::to_string(i))(x), config_.slope);
    }
  } else if (config_.bottleneck == BottleneckKind::Gia) {
    const GiaModule gia{layer("gia.shrink"), layer("gia.fuse")};
    x = gia.forward(x, config_.slope, trace != nullptr ? &trace->global_branch : nullptr);
  }
  if (trace != nullptr) trace->bottleneck = x;
  for (int64_t k = config_.depth - 2; k >= 0; --k) {
    x = nn::concat_channels(layer(up_name(k))(x), skips[static_cast<std::size_t>(k)]);
    x = block(dec_name(k, 1), x);
    x = block(dec_name(k, 2), x);
  }
  return nn::depth_to_space(layer("head")(x), config_.out_factor);
}

std::vector<std::pair<std::string, Tensor>> Network::parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& name : order_) {
    const Conv& c = layers_.at(name);
    out.emplace_back(name + ".weight", c.weight);
    if (c.bias.defined()) out.emplace_back(name + ".bias", c.bias);
  }
  return out;
}

int64_t Network::parameter_count() const {
  int64_t total = 0;
  for (const auto& [name, t] : parameters()) total += t.numel();
  return total;
}

void Network::zero_head() {
  Conv& head = layers_.at("head");
  std::fill(head.weight.data().begin(), head.weight.data().end(), 0.0F);
  if (head.bias.defined()) std::fill(head.bias.data().begin(), head.bias.data().end(), 0.0F);
}

Tensor clamp_unit(const Tensor& rgb) {
  Tensor out = rgb.detach();
  for (auto& v : out.data()) v = std::clamp(v, 0.0F, 1.0F);
  return out;
}

}  // namespace gianet::models

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gianet/nn_ops.hpp"
#include "gianet/tensor.hpp"

namespace gianet::models {

enum class BlockKind { Plain, Dilated, SeeWider };
enum class BottleneckKind { None, Gia, ExtraConvs };

/// Channel counts of the global-information module. Zero means "derive from
/// the bottleneck width C": c1 = C/2, c2 = C (256/512 for the full network).
struct GiaSpec {
  int64_t c1 = 0;
  int64_t c2 = 0;
  bool operator==(const GiaSpec&) const = default;
};

/// Declarative description of one U-Net variant.
struct ArchConfig {
  int64_t in_ch = 4;
  int64_t base_width = 32;
  int64_t depth = 5;
  double width_scale = 1.0;
  BlockKind block = BlockKind::Plain;
  int64_t dilation = 2;
  /// Share of a see-wider block's output produced by its plain branch.
  double sw_local_fraction = 0.5;
  BottleneckKind bottleneck = BottleneckKind::None;
  GiaSpec gia;
  int64_t extra_convs = 2;
  int64_t out_factor = 2;
  float slope = 0.2F;

  void validate() const;

  /// Encoder width at `level`: round(base_width * width_scale) * 2^level.
  [[nodiscard]] int64_t width(int64_t level) const;
  [[nodiscard]] int64_t bottleneck_width() const { return width(depth - 1); }
  [[nodiscard]] GiaSpec resolved_gia() const;
  /// Channels leaving the bottleneck stage.
  [[nodiscard]] int64_t bottleneck_out_width() const;
  [[nodiscard]] int64_t head_channels() const { return 3 * out_factor * out_factor; }
  /// Packed spatial dims must be a multiple of this.
  [[nodiscard]] int64_t spatial_multiple() const { return int64_t{1} << (depth - 1); }

  /// `key = value` lines; from_text(to_text()) reproduces the config exactly.
  [[nodiscard]] std::string to_text() const;
  static ArchConfig from_text(std::string_view text);

  bool operator==(const ArchConfig&) const = default;
};

/// Full-scale configuration of a named variant: sid, sid-dilated, sw, gia,
/// gia-l1 (same network as gia; the name selects the loss in the trainer) and
/// sid-extra (two plain convs appended to the bottleneck).
ArchConfig variant(std::string_view name, int64_t in_ch = 4);
/// The reduced network used for CPU training: width_scale 0.25, depth 4.
ArchConfig desk_preset(std::string_view name, int64_t in_ch = 4);
const std::vector<std::string>& variant_names();
/// Packing factor implied by the input channel count (4 -> 2, 9 -> 3).
int64_t packing_factor(int64_t in_ch);

// ---------------------------------------------------------------------------
// Layer plan: the single list of parametric and parameter-free stages that
// both the network builder and the cost counter walk.

enum class LayerOp { Conv, UpConv, MaxPool, GlobalPool, Upsample, Activation, Concat, DepthToSpace };

struct PlannedLayer {
  std::string name;
  LayerOp op = LayerOp::Conv;
  nn::Conv2dSpec conv;  // Conv / UpConv only
  /// Pyramid level whose resolution the output lives at; -1 means 1x1.
  int64_t level = 0;
  /// Output channels (used for per-element costs).
  int64_t channels = 0;
};

std::vector<PlannedLayer> layer_plan(const ArchConfig& config);

/// Output i along an axis sees input pixels [start + i*jump, start + i*jump + size).
struct ReceptiveField {
  int64_t size = 1;
  int64_t jump = 1;
  int64_t start = 0;
  bool global = false;

  [[nodiscard]] bool covers(int64_t output_index, int64_t input_index) const {
    if (global) return true;
    const int64_t lo = start + output_index * jump;
    return input_index >= lo && input_index < lo + size;
  }
};

/// Receptive field, in packed-input pixels, of the bottleneck output.
/// Global once a pooling path feeds the bottleneck.
ReceptiveField bottleneck_receptive_field(const ArchConfig& config);
/// Receptive field after every stage up to the bottleneck, in order.
std::vector<std::pair<std::string, ReceptiveField>> receptive_field_trace(const ArchConfig& config);

// ---------------------------------------------------------------------------

/// A convolution with its own parameters.
struct Conv {
  nn::Conv2dSpec spec;
  Tensor weight;
  Tensor bias;
  bool transposed = false;

  Tensor operator()(const Tensor& x) const;
};

/// Truncated-normal (sigma = sqrt(2 / fan_in), cut at 2 sigma) weights and
/// zero bias, seeded by (seed, name).
Conv make_conv(const nn::Conv2dSpec& spec, uint64_t seed, std::string_view name, bool transposed = false);

/// Global information module: pool -> 1x1 shrink (+LReLU) -> bilinear
/// broadcast -> concat with x -> 1x1 fuse (+LReLU).
struct GiaModule {
  Conv shrink;
  Conv fuse;

  static GiaModule create(int64_t channels, GiaSpec spec, uint64_t seed, std::string_view name = "gia");
  /// `global_branch`, when given, receives the broadcast global features.
  Tensor forward(const Tensor& x, float slope, Tensor* global_branch = nullptr) const;
};

/// See-wider block: concat(LReLU(conv3x3 -> c_local), LReLU(dilated conv3x3 -> c_wide)).
struct SwBlock {
  Conv local;
  Conv wide;

  static SwBlock create(int64_t in_ch, int64_t c_local, int64_t c_wide, int64_t dilation, uint64_t seed,
                        std::string_view name = "sw");
  Tensor forward(const Tensor& x, float slope) const;
};

struct ForwardTrace {
  Tensor bottleneck;
  Tensor global_branch;
};

class Network {
 public:
  explicit Network(ArchConfig config, uint64_t seed = 0);

  [[nodiscard]] const ArchConfig& config() const { return config_; }

  /// Packed (n, in_ch, h, w) -> RGB (n, 3, h*r, w*r). No output clamp.
  Tensor forward(const Tensor& packed, ForwardTrace* trace = nullptr) const;

  /// Parameter handles in layer-plan order, named "<layer>.weight|bias".
  [[nodiscard]] std::vector<std::pair<std::string, Tensor>> parameters() const;
  [[nodiscard]] int64_t parameter_count() const;
  /// Zeros the head so the network outputs exactly 0.
  void zero_head();

 private:
  [[nodiscard]] const Conv& layer(const std::string& name) const;
  [[nodiscard]] Tensor block(const std::string& name, const Tensor& x) const;

  ArchConfig config_;
  std::vector<std::string> order_;
  std::map<std::string, Conv> layers_;
};

/// Clamps predictions to [0, 1] for inference output.
Tensor clamp_unit(const Tensor& rgb);

}  // namespace gianet::models

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gianet/models.hpp"
#include "gianet/nn_ops.hpp"

// Analytic parameter and FLOP accounting.
//
// Convention: one multiply-accumulate is 2 FLOPs; a bias add is 1 FLOP per
// output element; activations, pooling and interpolation cost 1 FLOP per
// element they produce (global pooling: per element it reads). Concatenation
// and depth-to-space are free.

namespace gianet::nn {

struct LayerCost {
  std::string name;
  int64_t params = 0;
  int64_t flops = 0;
};

struct CostReport {
  std::vector<LayerCost> layers;
  int64_t params = 0;
  int64_t flops = 0;

  /// Plain-text table: layer, params, flops, cumulative flops.
  [[nodiscard]] std::string table() const;
};

int64_t conv_flops(const Conv2dSpec& spec, int64_t out_h, int64_t out_w);
int64_t conv_transposed_flops(const Conv2dSpec& spec, int64_t out_h, int64_t out_w);

/// Raw sensor resolution, before packing.
struct Resolution {
  int64_t width = 0;
  int64_t height = 0;
};

/// Parses "WIDTHxHEIGHT".
Resolution parse_resolution(const std::string& text);

/// Per-layer costs for a sensor image of `raw` resolution. The raw size must
/// divide by the packing factor. Pyramid levels round up when halving an odd
/// extent (the decoder restores each skip's exact size), so any packed size
/// can be costed even though forward() needs exact divisibility.
CostReport cost_report(const models::ArchConfig& config, Resolution raw);

int64_t count_params(const models::ArchConfig& config);
int64_t count_flops(const models::ArchConfig& config, Resolution raw);

}  // namespace gianet::nn

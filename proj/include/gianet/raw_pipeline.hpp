#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gianet/tensor.hpp"

namespace gianet::raw {

enum class Cfa : uint8_t { None = 0, Bayer = 1, XTrans = 2 };

/// Single-plane sensor mosaic plus the metadata needed to normalize it.
struct RawFrame {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint16_t> mosaic;  // row-major counts
  Cfa cfa = Cfa::Bayer;
  float black_level = 0.0F;
  float white_level = 16383.0F;
  float exposure_s = 0.1F;

  /// Throws InconsistentError when dims or levels violate the CFA contract.
  void validate() const;
  [[nodiscard]] uint16_t at(int64_t y, int64_t x) const { return mosaic[static_cast<std::size_t>(y * width + x)]; }
  bool operator==(const RawFrame&) const = default;
};

/// Channels per CFA packing: 4 for Bayer, 9 for X-Trans.
int64_t packed_channels(Cfa cfa);
/// Spatial reduction per CFA packing: 2 for Bayer, 3 for X-Trans.
int64_t packing_stride(Cfa cfa);
/// Color (0 = R, 1 = G, 2 = B) of the filter over mosaic site (y, x).
int color_at(Cfa cfa, int64_t y, int64_t x);

/// Bayer 2x2 phases as channels in the order (0,0), (0,1), (1,1), (1,0),
/// i.e. R, G1, B, G2 for an RGGB sensor. Values are raw counts.
Tensor pack_bayer(const RawFrame& frame);
/// Each of the 9 positions of a 3x3 tile becomes a channel, row-major.
Tensor pack_xtrans(const RawFrame& frame);
Tensor pack(const RawFrame& frame);

/// Inverse of pack_*: counts are rounded back to uint16 and metadata copied
/// from `meta`.
RawFrame unpack(const Tensor& packed, const RawFrame& meta);

/// Normalized, amplified network input.
struct PackedInput {
  Tensor tensor;  // (1, c, h', w'), values >= 0
  float ratio = 1.0F;
};

constexpr float kDefaultRatioCap = 300.0F;

/// clamp0((counts - black) / (white - black)) * min(target / exposure, cap).
/// No upper clamp after amplification.
PackedInput normalize_amplify(const Tensor& packed_counts, const RawFrame& frame, float target_exposure_s,
                              float ratio_cap = kDefaultRatioCap);
/// pack + normalize_amplify.
PackedInput preprocess(const RawFrame& frame, float target_exposure_s, float ratio_cap = kDefaultRatioCap);

/// Paired training example.
struct Sample {
  PackedInput input;
  Tensor target;  // (1, 3, h' * r, w' * r) in [0, 1]
  int64_t factor = 2;
  std::string id;
};

struct AugmentParams {
  int64_t a = 32;
  int64_t b_min = 16;
  int64_t b_max = 32;
  bool flips = true;
  bool operator==(const AugmentParams&) const = default;
};

/// Every random decision augment() made, so it can be replayed or forced.
struct AugmentDecision {
  int64_t b = 0;
  int64_t patch = 0;  // packed patch side a * b
  int64_t y0 = 0;     // packed-grid offsets
  int64_t x0 = 0;
  bool hflip = false;
  bool vflip = false;
  bool transpose = false;
  bool clamped = false;  // b's upper bound was lowered to fit the image
};

/// Uniform b in [b_min, b_max] (upper bound clamped to what fits), uniform
/// crop position, then independent 50% horizontal flip, vertical flip and
/// transpose, applied identically to input and target.
Sample augment(const Sample& sample, std::mt19937_64& rng, const AugmentParams& params = {},
               AugmentDecision* decision = nullptr);
/// Applies a fixed decision (crop offsets and flags) without drawing randomness.
Sample apply_augment(const Sample& sample, const AugmentDecision& decision);

/// Parameters of the synthetic low-light pair generator.
struct SynthParams {
  float ratio = 100.0F;          // long / short exposure
  float long_exposure_s = 10.0F;
  float black_level = 512.0F;
  float white_level = 16383.0F;
  float read_noise = 4.0F;       // counts, standard deviation
  float shot_gain = 1.0F;        // counts per photo-electron; 0 disables shot noise
  /// Per-channel illuminant gains are drawn from [1 - cast, 1 + cast] and
  /// applied to the sensor signal but not to the target.
  float color_cast = 0.0F;
  int blobs = 12;                // smooth components per channel
};

struct SynthPair {
  RawFrame short_frame;
  Tensor target;  // (1, 3, h, w) clean long-exposure RGB
};

/// Smooth random RGB scene -> CFA mosaic -> short exposure with shot and read
/// noise -> quantized counts above the black level.
SynthPair synth_scene(std::mt19937_64& rng, int64_t height, int64_t width, Cfa cfa, const SynthParams& params = {});

/// Naive reconstruction used as a baseline: per-site normalized, amplified
/// value placed into the site's color plane and averaged over each CFA tile.
Tensor naive_rgb(const RawFrame& frame, float ratio);

/// Independent generator for sample `index` of a run seeded with `seed`.
std::mt19937_64 split_rng(uint64_t seed, uint64_t index);

}  // namespace gianet::raw

#include "gianet/raw_pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "gianet/error.hpp"

namespace gianet::raw {

namespace {

// Fuji X-Trans 6x6 layout (0 = R, 1 = G, 2 = B).
constexpr int kXTrans[6][6] = {
    {1, 2, 1, 1, 0, 1},  //
    {0, 1, 0, 2, 1, 2},  //
    {1, 2, 1, 1, 0, 1},  //
    {1, 0, 1, 1, 2, 1},  //
    {2, 1, 2, 0, 1, 0},  //
    {1, 0, 1, 1, 2, 1},
};

// Bayer phase (dy, dx) for each packed channel.
constexpr int kBayerPhase[4][2] = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};

void require_cfa(const RawFrame& f, Cfa expected, const char* op) {
  if (f.cfa != expected) throw ShapeError(std::string(op) + ": frame has the wrong CFA kind");
}

}  // namespace

void RawFrame::validate() const {
  if (height < 0 || width < 0) throw InconsistentError("raw frame: negative dimensions");
  const int64_t m = cfa == Cfa::Bayer ? 2 : (cfa == Cfa::XTrans ? 6 : 1);
  if (height % m != 0 || width % m != 0) {
    throw InconsistentError("raw frame: " + std::to_string(height) + "x" + std::to_string(width) +
                            " is not divisible by " + std::to_string(m) + " for its CFA");
  }
  if (!(black_level < white_level)) throw InconsistentError("raw frame: black level must be below white level");
  if (!(exposure_s > 0.0F)) throw InconsistentError("raw frame: exposure must be positive");
  if (!mosaic.empty() && static_cast<int64_t>(mosaic.size()) != height * width) {
    throw InconsistentError("raw frame: mosaic holds " + std::to_string(mosaic.size()) + " counts for " +
                            std::to_string(height) + "x" + std::to_string(width));
  }
}

int64_t packed_channels(Cfa cfa) {
  switch (cfa) {
    case Cfa::Bayer:
      return 4;
    case Cfa::XTrans:
      return 9;
    case Cfa::None:
      break;
  }
  throw ShapeError("packing needs a Bayer or X-Trans frame");
}

int64_t packing_stride(Cfa cfa) {
  switch (cfa) {
    case Cfa::Bayer:
      return 2;
    case Cfa::XTrans:
      return 3;
    case Cfa::None:
      break;
  }
  throw ShapeError("packing needs a Bayer or X-Trans frame");
}

int color_at(Cfa cfa, int64_t y, int64_t x) {
  if (cfa == Cfa::Bayer) {
    const int64_t py = y % 2;
    const int64_t px = x % 2;
    if (py == 0 && px == 0) return 0;
    if (py == 1 && px == 1) return 2;
    return 1;
  }
  if (cfa == Cfa::XTrans) return kXTrans[y % 6][x % 6];
  throw ShapeError("color_at: frame has no CFA");
}

Tensor pack_bayer(const RawFrame& frame) {
  require_cfa(frame, Cfa::Bayer, "pack_bayer");
  frame.validate();
  const int64_t h = frame.height / 2;
  const int64_t w = frame.width / 2;
  Tensor out(Shape{1, 4, h, w});
  for (int64_t c = 0; c < 4; ++c) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        out.at(0, c, y, x) = frame.at(2 * y + kBayerPhase[c][0], 2 * x + kBayerPhase[c][1]);
      }
    }
  }
  return out;
}

Tensor pack_xtrans(const RawFrame& frame) {
  require_cfa(frame, Cfa::XTrans, "pack_xtrans");
  frame.validate();
  const int64_t h = frame.height / 3;
  const int64_t w = frame.width / 3;
  Tensor out(Shape{1, 9, h, w});
  for (int64_t c = 0; c < 9; ++c) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        out.at(0, c, y, x) = frame.at(3 * y + c / 3, 3 * x + c % 3);
      }
    }
  }
  return out;
}

Tensor pack(const RawFrame& frame) {
  if (frame.cfa == Cfa::Bayer) return pack_bayer(frame);
  if (frame.cfa == Cfa::XTrans) return pack_xtrans(frame);
  throw ShapeError("pack: frame has no CFA");
}

RawFrame unpack(const Tensor& packed, const RawFrame& meta) {
  const Shape s = packed.shape();
  const int64_t stride = packing_stride(meta.cfa);
  if (s.n != 1 || s.c != packed_channels(meta.cfa)) {
    throw ShapeError("unpack: " + s.str() + " does not match the frame's CFA packing");
  }
  RawFrame out = meta;
  out.height = s.h * stride;
  out.width = s.w * stride;
  out.mosaic.assign(static_cast<std::size_t>(out.height * out.width), 0);
  for (int64_t c = 0; c < s.c; ++c) {
    const int64_t dy = meta.cfa == Cfa::Bayer ? kBayerPhase[c][0] : c / 3;
    const int64_t dx = meta.cfa == Cfa::Bayer ? kBayerPhase[c][1] : c % 3;
    for (int64_t y = 0; y < s.h; ++y) {
      for (int64_t x = 0; x < s.w; ++x) {
        const float v = std::clamp(std::round(packed.at(0, c, y, x)), 0.0F, 65535.0F);
        out.mosaic[static_cast<std::size_t>((stride * y + dy) * out.width + stride * x + dx)] =
            static_cast<uint16_t>(v);
      }
    }
  }
  return out;
}

PackedInput normalize_amplify(const Tensor& packed_counts, const RawFrame& frame, float target_exposure_s,
                              float ratio_cap) {
  if (!(target_exposure_s > 0.0F)) throw ConfigError("target exposure must be positive");
  if (!(frame.exposure_s > 0.0F)) throw ConfigError("frame exposure must be positive");
  if (!(ratio_cap > 0.0F)) throw ConfigError("ratio cap must be positive");
  PackedInput out;
  out.ratio = std::min(target_exposure_s / frame.exposure_s, ratio_cap);
  const float range = frame.white_level - frame.black_level;
  std::vector<float> v(packed_counts.data().begin(), packed_counts.data().end());
  for (auto& x : v) {
    x = std::max((x - frame.black_level) / range, 0.0F) * out.ratio;
  }
  out.tensor = Tensor(packed_counts.shape(), std::move(v));
  return out;
}

PackedInput preprocess(const RawFrame& frame, float target_exposure_s, float ratio_cap) {
  return normalize_amplify(pack(frame), frame, target_exposure_s, ratio_cap);
}

namespace {

Tensor crop_transform(const Tensor& src, int64_t y0, int64_t x0, int64_t side, const AugmentDecision& d) {
  const Shape s = src.shape();
  Tensor out(Shape{s.n, s.c, side, side});
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      for (int64_t y = 0; y < side; ++y) {
        for (int64_t x = 0; x < side; ++x) {
          // Output (y, x) after crop -> hflip -> vflip -> transpose.
          int64_t yy = d.transpose ? x : y;
          int64_t xx = d.transpose ? y : x;
          if (d.vflip) yy = side - 1 - yy;
          if (d.hflip) xx = side - 1 - xx;
          out.at(n, c, y, x) = src.at(n, c, y0 + yy, x0 + xx);
        }
      }
    }
  }
  return out;
}

}  // namespace

Sample apply_augment(const Sample& sample, const AugmentDecision& d) {
  const Shape in = sample.input.tensor.shape();
  if (d.patch < 1 || d.y0 < 0 || d.x0 < 0 || d.y0 + d.patch > in.h || d.x0 + d.patch > in.w) {
    throw ShapeError("augment: patch of side " + std::to_string(d.patch) + " at (" + std::to_string(d.y0) + "," +
                     std::to_string(d.x0) + ") exceeds " + in.str());
  }
  const int64_t r = sample.factor;
  const Shape t = sample.target.shape();
  if (t.h != in.h * r || t.w != in.w * r) {
    throw ShapeError("augment: target " + t.str() + " is not " + std::to_string(r) + "x the input " + in.str());
  }
  Sample out;
  out.factor = r;
  out.id = sample.id;
  out.input.ratio = sample.input.ratio;
  out.input.tensor = crop_transform(sample.input.tensor, d.y0, d.x0, d.patch, d);
  out.target = crop_transform(sample.target, r * d.y0, r * d.x0, r * d.patch, d);
  return out;
}

Sample augment(const Sample& sample, std::mt19937_64& rng, const AugmentParams& p, AugmentDecision* decision) {
  if (p.a < 1 || p.b_min < 1 || p.b_max < p.b_min) throw ConfigError("augment: need a >= 1 and 1 <= b_min <= b_max");
  const Shape in = sample.input.tensor.shape();
  const int64_t side = std::min(in.h, in.w);
  const int64_t fit = side / p.a;
  if (fit < 1) {
    throw ShapeError("augment: image " + in.str() + " is smaller than one patch unit of " + std::to_string(p.a));
  }
  AugmentDecision d;
  const int64_t b_hi = std::min(p.b_max, fit);
  const int64_t b_lo = std::min(p.b_min, b_hi);
  d.clamped = b_hi < p.b_max;
  d.b = std::uniform_int_distribution<int64_t>(b_lo, b_hi)(rng);
  d.patch = p.a * d.b;
  d.y0 = std::uniform_int_distribution<int64_t>(0, in.h - d.patch)(rng);
  d.x0 = std::uniform_int_distribution<int64_t>(0, in.w - d.patch)(rng);
  if (p.flips) {
    std::bernoulli_distribution coin(0.5);
    d.hflip = coin(rng);
    d.vflip = coin(rng);
    d.transpose = coin(rng);
  }
  if (decision != nullptr) *decision = d;
  return apply_augment(sample, d);
}

namespace {

// Smooth positive field: a base level plus Gaussian blobs.
std::vector<float> smooth_field(std::mt19937_64& rng, int64_t h, int64_t w, int blobs) {
  std::uniform_real_distribution<float> unit(0.0F, 1.0F);
  std::vector<float> field(static_cast<std::size_t>(h * w), 0.05F + 0.25F * unit(rng));
  const float scale = static_cast<float>(std::max(h, w));
  for (int b = 0; b < blobs; ++b) {
    const float cy = unit(rng) * static_cast<float>(h);
    const float cx = unit(rng) * static_cast<float>(w);
    const float sigma = (0.06F + 0.22F * unit(rng)) * scale;
    const float amp = unit(rng);
    const float inv = 1.0F / (2.0F * sigma * sigma);
    for (int64_t y = 0; y < h; ++y) {
      const float dy = static_cast<float>(y) - cy;
      for (int64_t x = 0; x < w; ++x) {
        const float dx = static_cast<float>(x) - cx;
        field[static_cast<std::size_t>(y * w + x)] += amp * std::exp(-(dy * dy + dx * dx) * inv);
      }
    }
  }
  return field;
}

}  // namespace

SynthPair synth_scene(std::mt19937_64& rng, int64_t height, int64_t width, Cfa cfa, const SynthParams& p) {
  const int64_t m = cfa == Cfa::Bayer ? 2 : (cfa == Cfa::XTrans ? 6 : 0);
  if (m == 0) throw ConfigError("synth: choose a Bayer or X-Trans CFA");
  if (height < m || width < m || height % m != 0 || width % m != 0) {
    throw ConfigError("synth: " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be a positive multiple of " + std::to_string(m));
  }
  if (!(p.ratio > 0.0F) || !(p.long_exposure_s > 0.0F)) throw ConfigError("synth: exposures must be positive");
  if (p.read_noise < 0.0F || p.shot_gain < 0.0F || p.color_cast < 0.0F || p.color_cast >= 1.0F) {
    throw ConfigError("synth: noise parameters must be >= 0 and color_cast in [0, 1)");
  }

  std::uniform_real_distribution<float> unit(0.0F, 1.0F);
  // All channels share one mean brightness, so the scene is gray on average.
  const float brightness = 0.2F + 0.3F * unit(rng);
  Tensor target(Shape{1, 3, height, width});
  for (int64_t c = 0; c < 3; ++c) {
    auto field = smooth_field(rng, height, width, p.blobs);
    double total = 0.0;
    for (float v : field) total += v;
    const auto scale = static_cast<float>(brightness * static_cast<double>(field.size()) / total);
    for (int64_t i = 0; i < height * width; ++i) {
      target.data()[static_cast<std::size_t>(c * height * width + i)] =
          std::min(field[static_cast<std::size_t>(i)] * scale, 1.0F);
    }
  }
  float gains[3] = {1.0F, 1.0F, 1.0F};
  for (float& g : gains) g = 1.0F - p.color_cast + 2.0F * p.color_cast * unit(rng);

  RawFrame frame;
  frame.height = height;
  frame.width = width;
  frame.cfa = cfa;
  frame.black_level = p.black_level;
  frame.white_level = p.white_level;
  frame.exposure_s = p.long_exposure_s / p.ratio;
  frame.mosaic.resize(static_cast<std::size_t>(height * width));
  const float range = p.white_level - p.black_level;
  std::normal_distribution<float> normal(0.0F, 1.0F);
  for (int64_t y = 0; y < height; ++y) {
    for (int64_t x = 0; x < width; ++x) {
      const int color = color_at(cfa, y, x);
      const float v = target.at(0, color, y, x) * gains[color] / p.ratio;
      const float signal = range * v;
      float counts = p.black_level + signal;
      const float variance = p.shot_gain * signal + p.read_noise * p.read_noise;
      if (variance > 0.0F) counts += std::sqrt(variance) * normal(rng);
      frame.mosaic[static_cast<std::size_t>(y * width + x)] =
          static_cast<uint16_t>(std::clamp(std::round(counts), 0.0F, 65535.0F));
    }
  }
  return {std::move(frame), std::move(target)};
}

Tensor naive_rgb(const RawFrame& frame, float ratio) {
  frame.validate();
  const int64_t tile = packing_stride(frame.cfa);
  const float range = frame.white_level - frame.black_level;
  Tensor out(Shape{1, 3, frame.height, frame.width});
  for (int64_t ty = 0; ty < frame.height; ty += tile) {
    for (int64_t tx = 0; tx < frame.width; tx += tile) {
      float sum[3] = {0, 0, 0};
      int count[3] = {0, 0, 0};
      for (int64_t y = ty; y < ty + tile; ++y) {
        for (int64_t x = tx; x < tx + tile; ++x) {
          const int c = color_at(frame.cfa, y, x);
          sum[c] += std::max((static_cast<float>(frame.at(y, x)) - frame.black_level) / range, 0.0F) * ratio;
          ++count[c];
        }
      }
      for (int c = 0; c < 3; ++c) {
        const float v = count[c] > 0 ? sum[c] / static_cast<float>(count[c]) : 0.0F;
        for (int64_t y = ty; y < ty + tile; ++y) {
          for (int64_t x = tx; x < tx + tile; ++x) out.at(0, c, y, x) = v;
        }
      }
    }
  }
  return out;
}

std::mt19937_64 split_rng(uint64_t seed, uint64_t index) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(index),
                    static_cast<uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace gianet::raw

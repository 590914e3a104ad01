#include <gtest/gtest.h>

#include <filesystem>

#include "gianet/bytes.hpp"
#include "gianet/container.hpp"
#include "gianet/error.hpp"
#include "gianet/losses.hpp"
#include "gianet/raw_pipeline.hpp"
#include "testing.hpp"

namespace gianet::raw {
namespace {

RawFrame ramp_frame(int64_t h, int64_t w, Cfa cfa) {
  RawFrame f;
  f.height = h;
  f.width = w;
  f.cfa = cfa;
  f.mosaic.resize(static_cast<std::size_t>(h * w));
  for (int64_t i = 0; i < h * w; ++i) f.mosaic[static_cast<std::size_t>(i)] = static_cast<uint16_t>(i);
  return f;
}

TEST(Packing, BayerConstant) {
  RawFrame f = ramp_frame(4, 6, Cfa::Bayer);
  std::fill(f.mosaic.begin(), f.mosaic.end(), uint16_t{77});
  const Tensor p = pack_bayer(f);
  EXPECT_EQ(p.shape(), (Shape{1, 4, 2, 3}));
  for (float v : p.data()) EXPECT_EQ(v, 77.0F);
}

TEST(Packing, BayerIndexOracle) {
  const RawFrame f = ramp_frame(4, 4, Cfa::Bayer);
  const Tensor p = pack_bayer(f);
  const int dy[4] = {0, 0, 1, 1};
  const int dx[4] = {0, 1, 1, 0};
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) EXPECT_EQ(p.at(0, c, y, x), static_cast<float>((2 * y + dy[c]) * 4 + 2 * x + dx[c]));
  EXPECT_EQ(p.at(0, 0, 0, 0), 0.0F);  // R
  EXPECT_EQ(p.at(0, 1, 0, 0), 1.0F);  // G1
  EXPECT_EQ(p.at(0, 2, 0, 0), 5.0F);  // B
  EXPECT_EQ(p.at(0, 3, 0, 0), 4.0F);  // G2
}

TEST(Packing, XTransIndexOracle) {
  const RawFrame f = ramp_frame(6, 6, Cfa::XTrans);
  const Tensor p = pack_xtrans(f);
  EXPECT_EQ(p.shape(), (Shape{1, 9, 2, 2}));
  for (int c = 0; c < 9; ++c)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) EXPECT_EQ(p.at(0, c, y, x), static_cast<float>((3 * y + c / 3) * 6 + 3 * x + c % 3));
  RawFrame k = f;
  std::fill(k.mosaic.begin(), k.mosaic.end(), uint16_t{5});
  const Tensor pk = pack_xtrans(k);
  for (float v : pk.data()) EXPECT_EQ(v, 5.0F);
}

TEST(Packing, Errors) {
  EXPECT_THROW(pack_bayer(ramp_frame(6, 6, Cfa::XTrans)), ShapeError);
  EXPECT_THROW(pack_bayer(ramp_frame(3, 4, Cfa::Bayer)), InconsistentError);
  EXPECT_THROW(pack_xtrans(ramp_frame(6, 9, Cfa::XTrans)), InconsistentError);
}

TEST(Packing, RoundTripsExtremes) {
  for (Cfa cfa : {Cfa::Bayer, Cfa::XTrans}) {
    RawFrame f = ramp_frame(12, 18, cfa);
    f.mosaic[0] = 0;
    f.mosaic[1] = 65535;
    EXPECT_EQ(unpack(pack(f), f), f);
    const Tensor p = pack(f);
    EXPECT_TRUE(testing::same_bits(pack(unpack(p, f)).data(), p.data()));
  }
  EXPECT_EQ(packed_channels(Cfa::Bayer), 4);
  EXPECT_EQ(packed_channels(Cfa::XTrans), 9);
}

TEST(NormalizeAmplify, Examples) {
  RawFrame f = ramp_frame(2, 2, Cfa::Bayer);
  f.black_level = 512;
  f.white_level = 16383;
  f.exposure_s = 0.1F;
  f.mosaic = {512, 16383, 100, 8447};
  const PackedInput ten = preprocess(f, 10.0F);
  EXPECT_FLOAT_EQ(ten.ratio, 100.0F);
  const PackedInput one = preprocess(f, 0.1F);
  EXPECT_EQ(one.ratio, 1.0F);
  EXPECT_EQ(one.tensor.at(0, 0, 0, 0), 0.0F);  // black level
  EXPECT_EQ(one.tensor.at(0, 1, 0, 0), 1.0F);  // white level
  EXPECT_EQ(one.tensor.at(0, 3, 0, 0), 0.0F);  // below black clamps to 0
  EXPECT_FLOAT_EQ(one.tensor.at(0, 2, 0, 0), (8447.0F - 512.0F) / (16383.0F - 512.0F));
  // No post-clamp: amplified values exceed 1.
  EXPECT_NEAR(ten.tensor.at(0, 1, 0, 0), 100.0F, 1e-4);
  EXPECT_FLOAT_EQ(preprocess(f, 1000.0F).ratio, kDefaultRatioCap);
  EXPECT_THROW(preprocess(f, 0.0F), ConfigError);
}

TEST(NormalizeAmplify, MonotoneAndLinearAboveBlack) {
  RawFrame f = ramp_frame(2, 2, Cfa::Bayer);
  f.black_level = 100;
  f.white_level = 1100;
  f.exposure_s = 1.0F;
  Tensor counts(Shape{1, 1, 1, 5}, std::vector<float>{50, 100, 300, 500, 700});
  const auto out = normalize_amplify(counts, f, 2.0F);
  for (int i = 1; i < 5; ++i) EXPECT_GE(out.tensor.data()[i], out.tensor.data()[i - 1]);
  EXPECT_NEAR(out.tensor.data()[3] - out.tensor.data()[2], out.tensor.data()[4] - out.tensor.data()[3], 1e-6);
}

Sample ramp_sample(int64_t side) {
  Sample s;
  s.factor = 2;
  s.input.tensor = Tensor(Shape{1, 4, side, side});
  for (std::size_t i = 0; i < s.input.tensor.data().size(); ++i) s.input.tensor.data()[i] = static_cast<float>(i);
  s.target = Tensor(Shape{1, 3, 2 * side, 2 * side});
  for (std::size_t i = 0; i < s.target.data().size(); ++i) s.target.data()[i] = static_cast<float>(i) * 0.5F;
  return s;
}

TEST(Augment, PatchSizesFromDefaults) {
  const Sample s = ramp_sample(1024);
  AugmentDecision d;
  d.b = 16;
  d.patch = 32 * 16;
  d.y0 = 3;
  d.x0 = 5;
  const Sample out = apply_augment(s, d);
  EXPECT_EQ(out.input.tensor.shape(), (Shape{1, 4, 512, 512}));
  EXPECT_EQ(out.target.shape(), (Shape{1, 3, 1024, 1024}));
  // Target offsets are exactly r times the packed offsets.
  EXPECT_EQ(out.input.tensor.at(0, 1, 0, 0), s.input.tensor.at(0, 1, 3, 5));
  EXPECT_EQ(out.target.at(0, 2, 0, 0), s.target.at(0, 2, 6, 10));
}

TEST(Augment, SeededDecisionsRepeat) {
  const Sample s = ramp_sample(64);
  const AugmentParams p{8, 2, 6, true};
  std::vector<AugmentDecision> a;
  std::vector<AugmentDecision> b;
  for (int run = 0; run < 2; ++run) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 20; ++i) {
      AugmentDecision d;
      (void)augment(s, rng, p, &d);
      (run == 0 ? a : b).push_back(d);
      EXPECT_GE(d.b, 2);
      EXPECT_LE(d.b, 6);
      EXPECT_EQ(d.patch, 8 * d.b);
    }
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].b, b[i].b);
    EXPECT_EQ(a[i].y0, b[i].y0);
    EXPECT_EQ(a[i].x0, b[i].x0);
    EXPECT_EQ(a[i].hflip, b[i].hflip);
    EXPECT_EQ(a[i].vflip, b[i].vflip);
    EXPECT_EQ(a[i].transpose, b[i].transpose);
  }
}

TEST(Augment, ClampsUpperBoundToImage) {
  const Sample s = ramp_sample(40);
  std::mt19937_64 rng(1);
  AugmentDecision d;
  const Sample out = augment(s, rng, AugmentParams{8, 2, 32, false}, &d);
  EXPECT_TRUE(d.clamped);
  EXPECT_LE(d.patch, 40);
  EXPECT_EQ(out.target.shape().h, 2 * d.patch);
  EXPECT_THROW(augment(ramp_sample(4), rng, AugmentParams{8, 1, 1, false}), ShapeError);
}

TEST(Augment, FlipsAreInvolutions) {
  const Sample s = ramp_sample(16);
  for (int mask = 1; mask < 8; ++mask) {
    AugmentDecision d;
    d.patch = 16;
    d.hflip = (mask & 1) != 0;
    d.vflip = (mask & 2) != 0;
    d.transpose = (mask & 4) != 0;
    Sample once = apply_augment(s, d);
    once.factor = 2;
    // Undo in reverse order: transpose first, then the flips.
    AugmentDecision t{0, 16, 0, 0, false, false, d.transpose, false};
    AugmentDecision f{0, 16, 0, 0, d.hflip, d.vflip, false, false};
    const Sample back = apply_augment(apply_augment(once, t), f);
    EXPECT_TRUE(testing::same_bits(back.input.tensor.data(), s.input.tensor.data())) << mask;
    EXPECT_TRUE(testing::same_bits(back.target.data(), s.target.data())) << mask;
    if (!d.transpose) {
      const Sample twice = apply_augment(once, d);
      EXPECT_TRUE(testing::same_bits(twice.input.tensor.data(), s.input.tensor.data())) << mask;
    }
  }
}

TEST(Synth, NoiselessUnitRatioReproducesMosaic) {
  SynthParams p;
  p.ratio = 1.0F;
  p.read_noise = 0.0F;
  p.shot_gain = 0.0F;
  std::mt19937_64 rng(5);
  const auto pair = synth_scene(rng, 12, 18, Cfa::XTrans, p);
  EXPECT_EQ(unpack(pack(pair.short_frame), pair.short_frame), pair.short_frame);
  const float range = p.white_level - p.black_level;
  for (int64_t y = 0; y < 12; ++y)
    for (int64_t x = 0; x < 18; ++x) {
      const float expect = std::round(p.black_level + range * pair.target.at(0, color_at(Cfa::XTrans, y, x), y, x));
      EXPECT_EQ(static_cast<float>(pair.short_frame.at(y, x)), expect);
    }
}

TEST(Synth, DimsRespectCfa) {
  std::mt19937_64 rng(6);
  const auto b = synth_scene(rng, 32, 48, Cfa::Bayer);
  EXPECT_EQ(b.short_frame.height, 32);
  EXPECT_EQ(b.target.shape(), (Shape{1, 3, 32, 48}));
  EXPECT_NO_THROW(b.short_frame.validate());
  EXPECT_THROW(synth_scene(rng, 32, 32, Cfa::XTrans), ConfigError);
  EXPECT_THROW(synth_scene(rng, 31, 30, Cfa::Bayer), ConfigError);
  for (float v : b.target.data()) {
    EXPECT_GE(v, 0.0F);
    EXPECT_LE(v, 1.0F);
  }
}

TEST(Synth, MoreReadNoiseLowersNaivePsnr) {
  const float levels[] = {1.0F, 4.0F, 16.0F};
  double mean[3] = {0, 0, 0};
  const int seeds = 24;
  for (int s = 0; s < seeds; ++s) {
    for (int i = 0; i < 3; ++i) {
      SynthParams p;
      p.read_noise = levels[i];
      auto rng = split_rng(100, static_cast<uint64_t>(s));
      const auto pair = synth_scene(rng, 32, 32, Cfa::Bayer, p);
      const Tensor est = naive_rgb(pair.short_frame, p.ratio);
      mean[i] += losses::psnr(est, pair.target) / seeds;
    }
  }
  EXPECT_GT(mean[0], mean[1]);
  EXPECT_GT(mean[1], mean[2]);
}

TEST(Synth, SplitRngIsStable) {
  auto a = split_rng(7, 3);
  auto b = split_rng(7, 3);
  auto c = split_rng(7, 4);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
}

}  // namespace
}  // namespace gianet::raw

namespace gianet::container {
namespace {

raw::RawFrame sample_frame() {
  std::mt19937_64 rng(9);
  raw::SynthParams p;
  auto f = raw::synth_scene(rng, 12, 12, raw::Cfa::XTrans, p).short_frame;
  f.mosaic[0] = 0;
  f.mosaic[1] = 65535;
  return f;
}

TEST(Container, RawRoundTrip) {
  const auto f = sample_frame();
  const auto path = std::filesystem::temp_directory_path() / "gianet_container_raw.giar";
  write(path, f);
  EXPECT_EQ(read_raw(path), f);
  std::filesystem::remove(path);
}

TEST(Container, ImageRoundTripsBits) {
  Tensor rgb = testing::random_tensor(Shape{1, 3, 5, 7}, 10, 0, 1);
  rgb.data()[0] = -0.0F;
  rgb.data()[1] = std::numeric_limits<float>::denorm_min();
  const auto rec = decode(encode(rgb_record(rgb, 10.0F)));
  const auto& im = std::get<ImageRecord>(rec);
  EXPECT_EQ(im.kind, Kind::Rgb);
  EXPECT_EQ(im.exposure_s, 10.0F);
  EXPECT_TRUE(testing::same_bits(im.tensor.data(), rgb.data()));

  ImageRecord packed;
  packed.kind = Kind::Packed;
  packed.cfa = raw::Cfa::XTrans;
  packed.ratio = 250.0F;
  packed.tensor = testing::random_tensor(Shape{1, 9, 2, 3}, 11, 0, 5);
  const auto back = std::get<ImageRecord>(decode(encode(packed)));
  EXPECT_EQ(back.tensor.shape(), (Shape{1, 9, 2, 3}));
  EXPECT_EQ(back.ratio, 250.0F);
  EXPECT_EQ(back.cfa, raw::Cfa::XTrans);
  EXPECT_TRUE(testing::same_bits(back.tensor.data(), packed.tensor.data()));
}

TEST(Container, HeaderLayout) {
  raw::RawFrame f;
  f.height = 2;
  f.width = 2;
  f.mosaic = {1, 2, 3, 0x1234};
  f.black_level = 0;
  f.white_level = 100;
  f.exposure_s = 0.5F;
  const std::string bytes = encode(f);
  ASSERT_EQ(bytes.size(), 4U + 3 + 8 + 12 + 8);
  EXPECT_EQ(bytes.substr(0, 4), "GIAR");
  EXPECT_EQ(bytes[4], 1);  // version
  EXPECT_EQ(bytes[5], 0);  // kind
  EXPECT_EQ(bytes[6], 1);  // Bayer
  EXPECT_EQ(static_cast<uint8_t>(bytes[7]), 2);  // height, little-endian
  EXPECT_EQ(static_cast<uint8_t>(bytes[bytes.size() - 2]), 0x34);
  EXPECT_EQ(static_cast<uint8_t>(bytes[bytes.size() - 1]), 0x12);
}

TEST(Container, DistinctErrors) {
  const std::string good = encode(sample_frame());
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode(bad_magic), BadMagicError);
  EXPECT_THROW(decode(good.substr(0, good.size() - 1)), TruncatedError);
  EXPECT_THROW(decode(good.substr(0, 10)), TruncatedError);
  std::string bad_cfa = good;
  bad_cfa[6] = 7;
  EXPECT_THROW(decode(bad_cfa), InconsistentError);
  std::string bad_dims = good;
  bad_dims[7] = 13;  // height 13 is not a multiple of 6 for X-Trans
  EXPECT_THROW(decode(bad_dims), InconsistentError);
  EXPECT_THROW(decode(good + "x"), InconsistentError);
}

TEST(Container, MissingFileNamesPath) {
  try {
    (void)read("/nonexistent/dir/frame.giar");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/frame.giar"), std::string::npos);
  }
}

}  // namespace
}  // namespace gianet::container

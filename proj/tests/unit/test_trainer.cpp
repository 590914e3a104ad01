#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "gianet/container.hpp"
#include "gianet/dataset.hpp"
#include "gianet/error.hpp"
#include "gianet/trainer.hpp"
#include "testing.hpp"

namespace gianet::train {
namespace {

TEST(Adam, ZeroGradientLeavesFreshParameterAlone) {
  std::vector<float> p{0.5F, -1.0F};
  std::vector<float> g{0.0F, 0.0F};
  std::vector<float> m(2);
  std::vector<float> v(2);
  adam_update(p, g, m, v, 1, 1e-3);
  EXPECT_EQ(p[0], 0.5F);
  EXPECT_EQ(p[1], -1.0F);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (float g0 : {1e-3F, 0.5F, -7.0F}) {
    std::vector<float> p{1.0F};
    std::vector<float> g{g0};
    std::vector<float> m(1);
    std::vector<float> v(1);
    adam_update(p, g, m, v, 1, 1e-2);
    EXPECT_NEAR(1.0F - p[0], std::copysign(1e-2, g0), 1e-6);
  }
}

TEST(Adam, ThreeStepHandOracle) {
  const double lr = 0.05;
  const double grads[3] = {0.3, -0.1, 0.2};
  std::vector<float> p{0.7F};
  std::vector<float> m(1);
  std::vector<float> v(1);
  double ep = 0.7;
  double em = 0;
  double ev = 0;
  for (int t = 1; t <= 3; ++t) {
    std::vector<float> g{static_cast<float>(grads[t - 1])};
    adam_update(p, g, m, v, t, lr);
    em = 0.9 * em + 0.1 * grads[t - 1];
    ev = 0.999 * ev + 0.001 * grads[t - 1] * grads[t - 1];
    ep -= lr * (em / (1 - std::pow(0.9, t))) / (std::sqrt(ev / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p[0], ep, 1e-6) << "step " << t;
  }
}

TEST(Adam, StepCountsAndMissingGradients) {
  Tensor w = Tensor::leaf(Shape{1, 1, 1, 2}, {1.0F, 2.0F});
  AdamState s;
  adam_step({{"w", w}}, s, 0.1);
  EXPECT_EQ(s.step, 1);
  EXPECT_EQ(w.data()[0], 1.0F);
  EXPECT_THROW(adam_update(w.data(), {}, s.m["w"], s.v["w"], 0, 0.1), ConfigError);
}

TEST(Schedule, TwoPhases) {
  TrainConfig c;
  c.lr_initial = 1e-4;
  c.epochs_per_phase = 3;
  EXPECT_EQ(lr_at_epoch(c, 0), 1e-4);
  EXPECT_EQ(lr_at_epoch(c, 2), 1e-4);
  EXPECT_DOUBLE_EQ(lr_at_epoch(c, 3), 1e-5);
  EXPECT_DOUBLE_EQ(lr_at_epoch(c, 5), 1e-5);
  c.batch_size = 3;
  EXPECT_EQ(steps_per_epoch(c, 8), 3);
  EXPECT_EQ(total_steps(c, 8), 18);
  c.max_steps = 4;
  EXPECT_EQ(total_steps(c, 8), 4);
  TrainConfig defaults;
  EXPECT_EQ(defaults.lr_initial, 0.1);
  EXPECT_EQ(defaults.epochs_per_phase, 2000);
}

TEST(Schedule, EpochOrderIsSeededPermutation) {
  TrainConfig c;
  c.seed = 4;
  auto a = epoch_order(c, 10, 0);
  EXPECT_EQ(a, epoch_order(c, 10, 0));
  EXPECT_NE(a, epoch_order(c, 10, 1));
  std::sort(a.begin(), a.end());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a[static_cast<std::size_t>(i)], i);
}

TEST(Config, TextRoundTripAndValidation) {
  TrainConfig c;
  c.lr_initial = 1.0 / 3.0;
  c.gamma = 0.3F;
  c.seed = 18446744073709551615ULL;
  c.variant = "sid-extra";
  c.patch = raw::AugmentParams{16, 2, 3, false};
  c.variable_patch = false;
  EXPECT_EQ(TrainConfig::from_text(c.to_text()), c);
  EXPECT_THROW(TrainConfig::from_text("gamma = 2\n"), ConfigError);
  EXPECT_THROW(TrainConfig::from_text("lr_initial = -1\n"), ConfigError);
  EXPECT_THROW(TrainConfig::from_text("variant = nope\n"), ConfigError);
  EXPECT_THROW(TrainConfig::from_text("batch = 1\n"), ConfigError);
  TrainConfig l1;
  l1.variant = "gia-l1";
  EXPECT_EQ(l1.effective_gamma(), 1.0F);
  EXPECT_EQ(TrainConfig{}.effective_gamma(), 0.84F);
  c.variable_patch = false;
  EXPECT_EQ(c.augment().b_max, c.augment().b_min);
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.lr_initial = 1e-3;
  c.seed = 5;
  c.patch = raw::AugmentParams{8, 1, 2, true};
  c.ssim_levels = 1;
  c.max_steps = 6;
  c.batch_size = 2;
  return c;
}

const std::vector<raw::Sample>& tiny_data() {
  static const auto data = synth_dataset(3, 3, 32, raw::Cfa::Bayer);
  return data;
}

bool same_curve(const std::vector<LossRow>& a, const std::vector<LossRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].step != b[i].step || a[i].lr != b[i].lr) return false;
    for (auto [x, y] : {std::pair{a[i].l1_term, b[i].l1_term}, std::pair{a[i].msssim_term, b[i].msssim_term},
                        std::pair{a[i].total, b[i].total}}) {
      if (std::memcmp(&x, &y, sizeof x) != 0) return false;
    }
  }
  return true;
}

TEST(Train, CurvesAreBitIdentical) {
  const auto a = train(tiny_config(), tiny_data());
  const auto b = train(tiny_config(), tiny_data());
  ASSERT_EQ(a.curve.size(), 6U);
  EXPECT_TRUE(same_curve(a.curve, b.curve));
  EXPECT_EQ(a.checkpoint, b.checkpoint);
  EXPECT_EQ(a.checkpoint.step, 6);
  EXPECT_EQ(a.checkpoint.adam.step, 6);
  for (const auto& r : a.curve) {
    EXPECT_TRUE(std::isfinite(r.total));
    EXPECT_NEAR(r.total, losses::combine_terms(0.84F, r.l1_term, r.msssim_term), 1e-5);
  }
}

TEST(Train, ResumeIsBitExact) {
  const auto straight = train(tiny_config(), tiny_data());
  TrainConfig first = tiny_config();
  first.max_steps = 3;
  const auto half = train(first, tiny_data());
  const Checkpoint reloaded = decode_checkpoint(encode_checkpoint(half.checkpoint));
  TrainOptions opts;
  opts.resume = &reloaded;
  const auto rest = train(tiny_config(), tiny_data(), opts);
  EXPECT_EQ(rest.checkpoint, straight.checkpoint);
  std::vector<LossRow> joined = half.curve;
  joined.insert(joined.end(), rest.curve.begin(), rest.curve.end());
  EXPECT_TRUE(same_curve(joined, straight.curve));
}

TEST(Train, PeriodicCheckpointsAndLog) {
  const auto dir = std::filesystem::temp_directory_path() / "gianet_train_ckpt";
  std::filesystem::remove_all(dir);
  TrainOptions opts;
  opts.checkpoint_every = 2;
  opts.checkpoint_dir = dir;
  opts.log_csv = dir / "loss.csv";
  std::filesystem::create_directories(dir);
  const auto r = train(tiny_config(), tiny_data(), opts);
  EXPECT_TRUE(std::filesystem::exists(dir / "step_00000002.giac"));
  EXPECT_TRUE(std::filesystem::exists(dir / "step_00000006.giac"));
  EXPECT_EQ(load_checkpoint(dir / "step_00000006.giac"), r.checkpoint);
  EXPECT_EQ(container::read_file(dir / "loss.csv"), loss_csv(r.curve));
  std::filesystem::remove_all(dir);
}

// With gamma = 1 the update equals one Adam step on the l1 gradient alone.
TEST(Train, GammaOneMatchesL1Update) {
  TrainConfig c = tiny_config();
  c.gamma = 1.0F;
  c.max_steps = 1;
  c.batch_size = 1;
  const auto r = train(c, tiny_data());

  const models::Network net(c.arch(4), c.seed);
  const auto params = net.parameters();
  const auto order = epoch_order(c, 3, 0);
  auto rng = raw::split_rng(c.seed, 0);
  const raw::Sample patch = raw::augment(tiny_data()[static_cast<std::size_t>(order[0])], rng, c.augment());
  const Tensor out = net.forward(patch.input.tensor);
  losses::joint_loss(out, patch.target, 1.0F, c.ssim()).total.backward();
  AdamState s;
  adam_step(params, s, c.lr_initial, c.adam);
  ASSERT_EQ(params.size(), r.checkpoint.params.size());
  double worst = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto a = params[i].second.data();
    const auto b = r.checkpoint.params[i].second.data();
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, static_cast<double>(std::abs(a[j] - b[j])));
  }
  EXPECT_LE(worst, 1e-7);
}

TEST(Train, DivergenceIsReported) {
  auto data = tiny_data();
  data[1].input.tensor = data[1].input.tensor.clone();
  for (auto& v : data[1].input.tensor.data()) v = std::numeric_limits<float>::quiet_NaN();
  try {
    (void)train(tiny_config(), data);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find(data[1].id), std::string::npos) << e.what();
  }
}

TEST(Train, ConfigChecks) {
  TrainConfig c = tiny_config();
  c.patch.a = 4;  // not a multiple of 8 at depth 4
  EXPECT_THROW(train(c, tiny_data()), ConfigError);
  c = tiny_config();
  c.ssim_levels = 3;  // 16-pixel patches cannot hold 44-pixel pyramids
  EXPECT_THROW(train(c, tiny_data()), ConfigError);
  EXPECT_THROW(train(tiny_config(), {}), ConfigError);
}

TEST(Checkpoint, RoundTripAndErrors) {
  const auto r = train(tiny_config(), tiny_data());
  const std::string bytes = encode_checkpoint(r.checkpoint);
  EXPECT_EQ(decode_checkpoint(bytes), r.checkpoint);
  EXPECT_EQ(bytes.substr(0, 4), "GIAC");
  std::string bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), BadMagicError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), TruncatedError);
  const auto path = std::filesystem::temp_directory_path() / "gianet_ckpt_truncated.giac";
  container::write_file(path, bytes.substr(0, 40));
  try {
    (void)load_checkpoint(path);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(path.string()), std::string::npos);
  }
  std::filesystem::remove(path);
  const models::Network net = restore_network(r.checkpoint);
  EXPECT_TRUE(testing::same_bits(net.parameters()[0].second.data(), r.checkpoint.params[0].second.data()));
}

TEST(Metrics, IdenticalImagesAndCsv) {
  const Tensor t = testing::random_tensor(Shape{1, 3, 48, 48}, 1, 0, 1);
  const ImageMetrics m = measure(t, t, "a");
  EXPECT_TRUE(std::isinf(m.psnr_db));
  EXPECT_NEAR(m.ssim, 1.0, 1e-6);
  EXPECT_NEAR(m.ms_ssim, 1.0, 1e-6);
  const std::string csv = metrics_csv({m, m});
  EXPECT_NE(csv.find("mean,inf"), std::string::npos) << csv;
}

TEST(Ablation, GridsAndIdenticalCells) {
  const auto grid = default_grid();
  ASSERT_EQ(grid.size(), 9U);
  EXPECT_EQ(grid[0].variant, "sid");
  EXPECT_FALSE(grid[0].msssim || grid[0].aug);
  EXPECT_EQ(grid[1].variant, "sid-extra");
  EXPECT_EQ(grid[8].variant, "gia");
  EXPECT_TRUE(grid[8].msssim && grid[8].aug);
  EXPECT_EQ(small_grid().size(), 4U);

  TrainConfig base = tiny_config();
  base.max_steps = 2;
  const auto test = synth_dataset(9, 2, 32, raw::Cfa::Bayer);
  const std::vector<AblationCell> cells{{"sid", false, false}, {"gia", true, true}, {"sid", false, false}};
  const auto rows = run_ablation(cells, base, tiny_data(), test);
  ASSERT_EQ(rows.size(), 3U);
  for (const auto& r : rows) EXPECT_TRUE(r.error.empty()) << r.error;
  EXPECT_TRUE(rows[1].gia);
  EXPECT_EQ(rows[0].psnr_db, rows[2].psnr_db);
  EXPECT_EQ(rows[0].ssim, rows[2].ssim);
  const std::string csv = ablation_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "no,variant,l1,gia,msssim,aug,extra_convs,psnr_db,ssim,error");

  TrainConfig broken = base;
  broken.ssim_levels = 4;
  const auto failed = run_ablation({{"gia", true, false}}, broken, tiny_data(), test);
  EXPECT_FALSE(failed[0].error.empty());
  EXPECT_TRUE(std::isnan(failed[0].psnr_db));
}

TEST(Dataset, WriteListLoad) {
  const auto dir = std::filesystem::temp_directory_path() / "gianet_dataset_test";
  std::filesystem::remove_all(dir);
  dataset::write_synth(dir, 3, 3, 32, raw::Cfa::Bayer);
  const auto pairs = dataset::list_pairs(dir);
  ASSERT_EQ(pairs.size(), 3U);
  const auto loaded = dataset::load_pairs(dir);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(testing::same_bits(loaded[i].target.data(), tiny_data()[i].target.data()));
    EXPECT_TRUE(testing::same_bits(loaded[i].input.tensor.data(), tiny_data()[i].input.tensor.data()));
  }
  std::filesystem::remove(pairs[0].target);
  EXPECT_THROW(dataset::list_pairs(dir), IoError);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  EXPECT_THROW(dataset::list_pairs(dir), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace gianet::train

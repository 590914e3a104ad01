#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gianet/losses.hpp"
#include "gianet/models.hpp"
#include "gianet/raw_pipeline.hpp"
#include "gianet/tensor.hpp"

namespace gianet::train {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamParams&) const = default;
};

/// First and second moments per parameter name plus the shared step count.
struct AdamState {
  int64_t step = 0;
  std::map<std::string, std::vector<float>> m;
  std::map<std::string, std::vector<float>> v;
  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update of a flat buffer; `t` is the 1-based step.
void adam_update(std::span<float> param, std::span<const float> grad, std::span<float> m, std::span<float> v,
                 int64_t t, double lr, const AdamParams& adam = {});

/// Advances `state` by one step and updates every parameter from its
/// gradient (absent gradient counts as zero).
void adam_step(const std::vector<std::pair<std::string, Tensor>>& params, AdamState& state, double lr,
               const AdamParams& adam = {});

struct TrainConfig {
  double lr_initial = 0.1;
  double lr_decay_factor = 0.1;
  int64_t epochs_per_phase = 2000;
  AdamParams adam;
  float gamma = 0.84F;
  uint64_t seed = 0;
  int64_t batch_size = 1;
  raw::AugmentParams patch{8, 4, 8, true};
  /// false draws every patch at b_min.
  bool variable_patch = true;
  std::string variant = "gia";
  double width_scale = 0.25;
  int64_t depth = 4;
  int ssim_levels = 3;
  /// Stop after this many steps; 0 runs both phases in full.
  int64_t max_steps = 0;

  void validate() const;
  /// gamma, or 1 for variants whose name ends in "-l1".
  [[nodiscard]] float effective_gamma() const;
  [[nodiscard]] losses::SsimParams ssim() const;
  [[nodiscard]] raw::AugmentParams augment() const;
  [[nodiscard]] models::ArchConfig arch(int64_t in_ch) const;

  [[nodiscard]] std::string to_text() const;
  static TrainConfig from_text(std::string_view text);
  bool operator==(const TrainConfig&) const = default;
};

/// lr_initial for epoch < epochs_per_phase, lr_initial * decay afterwards.
double lr_at_epoch(const TrainConfig& config, int64_t epoch);
int64_t steps_per_epoch(const TrainConfig& config, int64_t pairs);
int64_t total_steps(const TrainConfig& config, int64_t pairs);
/// Pair indices visited in `epoch`, a seeded permutation.
std::vector<int64_t> epoch_order(const TrainConfig& config, int64_t pairs, int64_t epoch);

struct Checkpoint {
  models::ArchConfig arch;
  TrainConfig train;
  int64_t step = 0;
  std::vector<std::pair<std::string, Tensor>> params;
  AdamState adam;

  bool operator==(const Checkpoint& other) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Network with the checkpoint's architecture and parameter values.
models::Network restore_network(const Checkpoint& ckpt);

struct LossRow {
  int64_t step = 0;
  float l1_term = 0.0F;
  float msssim_term = 0.0F;
  float total = 0.0F;
  double lr = 0.0;
  bool operator==(const LossRow&) const = default;
};

std::string loss_csv(const std::vector<LossRow>& rows);

struct TrainOptions {
  /// Continue from this state instead of a fresh initialization.
  const Checkpoint* resume = nullptr;
  /// Loss curve destination; rows are appended as they are produced.
  std::filesystem::path log_csv;
  int64_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  std::function<void(const LossRow&)> on_step;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRow> curve;
};

/// Adam on the joint loss over random patches of `data`. Throws
/// DivergenceError when a loss or parameter becomes non-finite.
TrainResult train(const TrainConfig& config, const std::vector<raw::Sample>& data, const TrainOptions& options = {});

struct ImageMetrics {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double ms_ssim = 0.0;
};

/// Metrics of one prediction. MS-SSIM uses as many pyramid levels as the
/// image supports, up to `params.levels`.
ImageMetrics measure(const Tensor& prediction, const Tensor& target, const std::string& id,
                     const losses::SsimParams& params = {});
/// Whole-image inference and metrics for every sample; predictions clamped to [0, 1].
std::vector<ImageMetrics> evaluate(const models::Network& net, const std::vector<raw::Sample>& data,
                                   const losses::SsimParams& params = {});
/// Metrics CSV with a trailing mean row.
std::string metrics_csv(const std::vector<ImageMetrics>& rows);

/// Synthetic paired dataset: sample i uses split_rng(seed, i).
std::vector<raw::Sample> synth_dataset(uint64_t seed, int64_t count, int64_t size, raw::Cfa cfa,
                                       const raw::SynthParams& params = {}, const std::string& prefix = "synth");

struct AblationCell {
  std::string variant;  // sid, sid-extra or gia
  bool msssim = false;  // joint loss instead of l1 only
  bool aug = false;     // variable patch size
};

struct AblationRow {
  int index = 0;
  AblationCell cell;
  bool gia = false;
  bool extra_convs = false;
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::string error;  // empty on success
};

/// The nine component combinations compared in the ablation table.
std::vector<AblationCell> default_grid();
/// {sid, gia} x {l1, joint}.
std::vector<AblationCell> small_grid();

/// Trains each cell from `base` with the shared seed and evaluates it on
/// `test`. A failing cell yields a row carrying its error.
std::vector<AblationRow> run_ablation(const std::vector<AblationCell>& grid, const TrainConfig& base,
                                      const std::vector<raw::Sample>& train_set,
                                      const std::vector<raw::Sample>& test_set);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace gianet::train

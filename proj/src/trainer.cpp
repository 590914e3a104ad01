#include "gianet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "gianet/error.hpp"
#include "gianet/keyvalue.hpp"
#include "gianet/ops.hpp"

namespace gianet::train {

namespace {

// Keeps the per-epoch shuffle streams apart from the per-step streams.
constexpr uint64_t kShuffleStream = uint64_t{1} << 63;

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

int levels_that_fit(int64_t side, const losses::SsimParams& p) {
  int levels = 0;
  while (levels < p.levels && (static_cast<int64_t>(p.window) << levels) <= side) ++levels;
  return levels;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void adam_update(std::span<float> param, std::span<const float> grad, std::span<float> m, std::span<float> v,
                 int64_t t, double lr, const AdamParams& a) {
  if (param.size() != m.size() || param.size() != v.size() || (!grad.empty() && grad.size() != param.size())) {
    throw ShapeError("adam: parameter, gradient and moment sizes differ");
  }
  if (t < 1) throw ConfigError("adam: step must be >= 1");
  const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    const double mi = a.beta1 * m[i] + (1.0 - a.beta1) * g;
    const double vi = a.beta2 * v[i] + (1.0 - a.beta2) * g * g;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    const double mhat = mi / c1;
    const double vhat = vi / c2;
    param[i] = static_cast<float>(param[i] - lr * mhat / (std::sqrt(vhat) + a.eps));
  }
}

void adam_step(const std::vector<std::pair<std::string, Tensor>>& params, AdamState& state, double lr,
               const AdamParams& adam) {
  ++state.step;
  for (const auto& [name, p] : params) {
    auto n = static_cast<std::size_t>(p.numel());
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(n, 0.0F);
    if (v.empty()) v.assign(n, 0.0F);
    Tensor handle = p;
    const std::span<const float> g = handle.has_grad() ? handle.grad() : std::span<const float>{};
    adam_update(handle.data(), g, m, v, state.step, lr, adam);
  }
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr_initial > 0.0)) throw ConfigError("train: lr_initial must be > 0");
  if (!(lr_decay_factor > 0.0)) throw ConfigError("train: lr_decay_factor must be > 0");
  if (epochs_per_phase < 1) throw ConfigError("train: epochs_per_phase must be >= 1");
  if (!(gamma >= 0.0F && gamma <= 1.0F)) throw ConfigError("train: gamma must lie in [0, 1]");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0)) {
    throw ConfigError("train: Adam betas must lie in [0, 1) and eps must be > 0");
  }
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (patch.a < 1 || patch.b_min < 1 || patch.b_max < patch.b_min) {
    throw ConfigError("train: patch needs a >= 1 and 1 <= b_min <= b_max");
  }
  if (!(width_scale > 0.0)) throw ConfigError("train: width_scale must be > 0");
  if (depth < 1) throw ConfigError("train: depth must be >= 1");
  if (ssim_levels < 1) throw ConfigError("train: ssim_levels must be >= 1");
  if (max_steps < 0) throw ConfigError("train: max_steps must be >= 0");
  (void)arch(4);
}

float TrainConfig::effective_gamma() const {
  if (variant.size() >= 3 && variant.ends_with("-l1")) return 1.0F;
  return gamma;
}

losses::SsimParams TrainConfig::ssim() const {
  losses::SsimParams p;
  p.levels = ssim_levels;
  return p;
}

raw::AugmentParams TrainConfig::augment() const {
  raw::AugmentParams p = patch;
  if (!variable_patch) p.b_max = p.b_min;
  return p;
}

models::ArchConfig TrainConfig::arch(int64_t in_ch) const {
  models::ArchConfig c = models::variant(variant, in_ch);
  c.width_scale = width_scale;
  c.depth = depth;
  c.validate();
  return c;
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "lr_initial = " << kv::exact_real(lr_initial) << '\n'
     << "lr_decay_factor = " << kv::exact_real(lr_decay_factor) << '\n'
     << "epochs_per_phase = " << epochs_per_phase << '\n'
     << "adam_beta1 = " << kv::exact_real(adam.beta1) << '\n'
     << "adam_beta2 = " << kv::exact_real(adam.beta2) << '\n'
     << "adam_eps = " << kv::exact_real(adam.eps) << '\n'
     << "gamma = " << kv::exact_real(gamma) << '\n'
     << "seed = " << seed << '\n'
     << "batch_size = " << batch_size << '\n'
     << "patch_a = " << patch.a << '\n'
     << "patch_b_min = " << patch.b_min << '\n'
     << "patch_b_max = " << patch.b_max << '\n'
     << "flips = " << (patch.flips ? "true" : "false") << '\n'
     << "variable_patch = " << (variable_patch ? "true" : "false") << '\n'
     << "variant = " << variant << '\n'
     << "width_scale = " << kv::exact_real(width_scale) << '\n'
     << "depth = " << depth << '\n'
     << "ssim_levels = " << ssim_levels << '\n'
     << "max_steps = " << max_steps << '\n';
  return os.str();
}

TrainConfig TrainConfig::from_text(std::string_view text) {
  TrainConfig c;
  for (const auto& [key, value] : kv::parse(text)) {
    if (key == "lr_initial") {
      c.lr_initial = kv::parse_real(key, value);
    } else if (key == "lr_decay_factor") {
      c.lr_decay_factor = kv::parse_real(key, value);
    } else if (key == "epochs_per_phase") {
      c.epochs_per_phase = kv::parse_int(key, value);
    } else if (key == "adam_beta1") {
      c.adam.beta1 = kv::parse_real(key, value);
    } else if (key == "adam_beta2") {
      c.adam.beta2 = kv::parse_real(key, value);
    } else if (key == "adam_eps") {
      c.adam.eps = kv::parse_real(key, value);
    } else if (key == "gamma") {
      c.gamma = static_cast<float>(kv::parse_real(key, value));
    } else if (key == "seed") {
      try {
        std::size_t used = 0;
        c.seed = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        throw ConfigError("config: 'seed' expects an unsigned integer, got '" + value + "'");
      }
    } else if (key == "batch_size") {
      c.batch_size = kv::parse_int(key, value);
    } else if (key == "patch_a") {
      c.patch.a = kv::parse_int(key, value);
    } else if (key == "patch_b_min") {
      c.patch.b_min = kv::parse_int(key, value);
    } else if (key == "patch_b_max") {
      c.patch.b_max = kv::parse_int(key, value);
    } else if (key == "flips") {
      c.patch.flips = kv::parse_bool(key, value);
    } else if (key == "variable_patch") {
      c.variable_patch = kv::parse_bool(key, value);
    } else if (key == "variant") {
      c.variant = value;
    } else if (key == "width_scale") {
      c.width_scale = kv::parse_real(key, value);
    } else if (key == "depth") {
      c.depth = kv::parse_int(key, value);
    } else if (key == "ssim_levels") {
      c.ssim_levels = static_cast<int>(kv::parse_int(key, value));
    } else if (key == "max_steps") {
      c.max_steps = kv::parse_int(key, value);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

double lr_at_epoch(const TrainConfig& config, int64_t epoch) {
  return epoch < config.epochs_per_phase ? config.lr_initial : config.lr_initial * config.lr_decay_factor;
}

int64_t steps_per_epoch(const TrainConfig& config, int64_t pairs) {
  return (pairs + config.batch_size - 1) / config.batch_size;
}

int64_t total_steps(const TrainConfig& config, int64_t pairs) {
  const int64_t full = 2 * config.epochs_per_phase * steps_per_epoch(config, pairs);
  return config.max_steps > 0 ? std::min(full, config.max_steps) : full;
}

std::vector<int64_t> epoch_order(const TrainConfig& config, int64_t pairs, int64_t epoch) {
  std::vector<int64_t> order(static_cast<std::size_t>(pairs));
  std::iota(order.begin(), order.end(), 0);
  auto rng = raw::split_rng(config.seed, kShuffleStream | static_cast<uint64_t>(epoch));
  for (int64_t i = pairs - 1; i > 0; --i) {
    const auto j = static_cast<int64_t>(rng() % static_cast<uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

std::string loss_csv(const std::vector<LossRow>& rows) {
  std::string out = "step,l1_term,msssim_term,total,lr\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + fmt(r.l1_term) + "," + fmt(r.msssim_term) + "," + fmt(r.total) + "," +
           fmt(r.lr) + "\n";
  }
  return out;
}

models::Network restore_network(const Checkpoint& ckpt) {
  models::Network net(ckpt.arch, ckpt.train.seed);
  auto params = net.parameters();
  if (params.size() != ckpt.params.size()) {
    throw InconsistentError("checkpoint holds " + std::to_string(ckpt.params.size()) + " tensors, network needs " +
                            std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params[i];
    const auto& [saved_name, saved] = ckpt.params[i];
    if (name != saved_name || !(p.shape() == saved.shape())) {
      throw InconsistentError("checkpoint tensor '" + saved_name + "' " + saved.shape().str() + " does not match '" +
                              name + "' " + p.shape().str());
    }
    std::copy(saved.data().begin(), saved.data().end(), p.data().begin());
  }
  return net;
}

namespace {

struct StepLoss {
  Tensor total;
  float l1 = 0.0F;
  float msssim = 0.0F;
};

StepLoss step_loss(const Tensor& out, const Tensor& target, float gamma, const losses::SsimParams& ssim) {
  if (gamma < 1.0F) {
    auto r = losses::joint_loss(out, target, gamma, ssim);
    return {r.total, r.l1_term, r.msssim_term};
  }
  // l1 only: the structural term is logged but never enters the graph.
  StepLoss s;
  s.total = losses::l1_loss(out, target);
  s.l1 = s.total.item();
  const Shape sh = out.shape();
  losses::SsimParams p = ssim;
  p.levels = levels_that_fit(std::min(sh.h, sh.w), ssim);
  if (p.levels > 0) {
    NoGradGuard off;
    s.msssim = 1.0F - losses::ms_ssim(out.detach(), target, p).item();
  } else {
    s.msssim = std::numeric_limits<float>::quiet_NaN();
  }
  return s;
}

void save_step_checkpoint(const TrainOptions& options, const Checkpoint& ckpt) {
  std::filesystem::create_directories(options.checkpoint_dir);
  char name[64];
  std::snprintf(name, sizeof name, "step_%08lld.giac", static_cast<long long>(ckpt.step));
  save_checkpoint(options.checkpoint_dir / name, ckpt);
}

Checkpoint snapshot(const models::ArchConfig& arch, const TrainConfig& config, int64_t step,
                    const std::vector<std::pair<std::string, Tensor>>& params, const AdamState& state) {
  Checkpoint c;
  c.arch = arch;
  c.train = config;
  c.step = step;
  for (const auto& [name, p] : params) c.params.emplace_back(name, p.detach());
  c.adam = state;
  return c;
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<raw::Sample>& data, const TrainOptions& options) {
  config.validate();
  if (data.empty()) throw ConfigError("train: the dataset is empty");
  const int64_t in_ch = data.front().input.tensor.shape().c;
  const models::ArchConfig arch = options.resume != nullptr ? options.resume->arch : config.arch(in_ch);
  if (arch.in_ch != in_ch) {
    throw ConfigError("train: network expects " + std::to_string(arch.in_ch) + " input channels, data has " +
                      std::to_string(in_ch));
  }
  const raw::AugmentParams aug = config.augment();
  if (aug.a % arch.spatial_multiple() != 0) {
    throw ConfigError("train: patch unit a=" + std::to_string(aug.a) + " must be a multiple of " +
                      std::to_string(arch.spatial_multiple()) + " for depth " + std::to_string(arch.depth));
  }
  const float gamma = config.effective_gamma();
  const losses::SsimParams ssim = config.ssim();
  if (gamma < 1.0F && arch.out_factor * aug.a * aug.b_min < ssim.min_side()) {
    throw ConfigError("train: smallest output patch " + std::to_string(arch.out_factor * aug.a * aug.b_min) +
                      " is below the " + std::to_string(ssim.min_side()) + " pixels MS-SSIM needs at " +
                      std::to_string(ssim.levels) + " levels");
  }

  models::Network net = options.resume != nullptr ? restore_network(*options.resume) : models::Network(arch, config.seed);
  AdamState state = options.resume != nullptr ? options.resume->adam : AdamState{};
  int64_t step = options.resume != nullptr ? options.resume->step : 0;
  const auto params = net.parameters();

  const auto n = static_cast<int64_t>(data.size());
  const int64_t per_epoch = steps_per_epoch(config, n);
  const int64_t last = total_steps(config, n);

  std::ofstream log;
  if (!options.log_csv.empty()) {
    const bool append = options.resume != nullptr && std::filesystem::exists(options.log_csv);
    log.open(options.log_csv, append ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write '" + options.log_csv.string() + "'");
    if (!append) log << "step,l1_term,msssim_term,total,lr\n";
  }

  TrainResult result;
  int64_t cached_epoch = -1;
  std::vector<int64_t> order;
  for (; step < last; ++step) {
    const int64_t epoch = step / per_epoch;
    if (epoch != cached_epoch) {
      order = epoch_order(config, n, epoch);
      cached_epoch = epoch;
    }
    const int64_t first = (step % per_epoch) * config.batch_size;
    const int64_t count = std::min(config.batch_size, n - first);
    for (const auto& [name, p] : params) {
      Tensor h = p;
      h.zero_grad();
    }
    auto rng = raw::split_rng(config.seed, static_cast<uint64_t>(step));
    LossRow row;
    row.step = step;
    for (int64_t b = 0; b < count; ++b) {
      const auto& sample = data[static_cast<std::size_t>(order[static_cast<std::size_t>(first + b)])];
      const raw::Sample patch = raw::augment(sample, rng, aug);
      const Tensor out = net.forward(patch.input.tensor);
      StepLoss loss = step_loss(out, patch.target, gamma, ssim);
      const float total = loss.total.item();
      if (!std::isfinite(total)) {
        throw DivergenceError("train: non-finite loss at step " + std::to_string(step) + " on '" + sample.id +
                              "' (l1 " + fmt(loss.l1) + ", ms-ssim " + fmt(loss.msssim) + ")");
      }
      const Tensor scaled = count > 1 ? loss.total * (1.0F / static_cast<float>(count)) : loss.total;
      scaled.backward();
      row.l1_term += loss.l1 / static_cast<float>(count);
      row.msssim_term += loss.msssim / static_cast<float>(count);
      row.total += total / static_cast<float>(count);
    }
    row.lr = lr_at_epoch(config, epoch);
    adam_step(params, state, row.lr, config.adam);
    for (const auto& [name, p] : params) {
      if (!all_finite(p.data())) {
        throw DivergenceError("train: parameter '" + name + "' became non-finite at step " + std::to_string(step));
      }
    }
    result.curve.push_back(row);
    if (log.is_open()) {
      log << row.step << ',' << fmt(row.l1_term) << ',' << fmt(row.msssim_term) << ',' << fmt(row.total) << ','
          << fmt(row.lr) << '\n';
    }
    if (options.on_step) options.on_step(row);
    if (options.checkpoint_every > 0 && !options.checkpoint_dir.empty() && (step + 1) % options.checkpoint_every == 0) {
      save_step_checkpoint(options, snapshot(arch, config, step + 1, params, state));
    }
  }
  result.checkpoint = snapshot(arch, config, step, params, state);
  return result;
}

// ---------------------------------------------------------------------------

ImageMetrics measure(const Tensor& prediction, const Tensor& target, const std::string& id,
                     const losses::SsimParams& params) {
  NoGradGuard off;
  const Shape s = prediction.shape();
  const int levels = levels_that_fit(std::min(s.h, s.w), params);
  if (levels < 1) {
    throw ShapeError("metrics: image " + s.str() + " is smaller than the " + std::to_string(params.window) +
                     "-pixel SSIM window");
  }
  losses::SsimParams p = params;
  p.levels = levels;
  ImageMetrics m;
  m.id = id;
  m.psnr_db = losses::psnr(prediction, target);
  m.ssim = losses::ssim(prediction, target, p).item();
  m.ms_ssim = losses::ms_ssim(prediction, target, p).item();
  return m;
}

std::vector<ImageMetrics> evaluate(const models::Network& net, const std::vector<raw::Sample>& data,
                                   const losses::SsimParams& params) {
  NoGradGuard off;
  std::vector<ImageMetrics> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    const Tensor pred = models::clamp_unit(net.forward(s.input.tensor));
    out.push_back(measure(pred, s.target, s.id, params));
  }
  return out;
}

std::string metrics_csv(const std::vector<ImageMetrics>& rows) {
  std::string out = "# RGB images; ssim and ms_ssim averaged over channels\nimage_id,psnr_db,ssim,ms_ssim\n";
  double psnr = 0.0;
  double ssim = 0.0;
  double ms = 0.0;
  for (const auto& r : rows) {
    out += r.id + "," + fmt(r.psnr_db) + "," + fmt(r.ssim) + "," + fmt(r.ms_ssim) + "\n";
    psnr += r.psnr_db;
    ssim += r.ssim;
    ms += r.ms_ssim;
  }
  const auto n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
  out += "mean," + fmt(psnr / n) + "," + fmt(ssim / n) + "," + fmt(ms / n) + "\n";
  return out;
}

std::vector<raw::Sample> synth_dataset(uint64_t seed, int64_t count, int64_t size, raw::Cfa cfa,
                                       const raw::SynthParams& params, const std::string& prefix) {
  if (count < 1) throw ConfigError("synth: count must be >= 1");
  std::vector<raw::Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    auto rng = raw::split_rng(seed, static_cast<uint64_t>(i));
    auto pair = raw::synth_scene(rng, size, size, cfa, params);
    raw::Sample s;
    s.input = raw::preprocess(pair.short_frame, params.long_exposure_s);
    s.target = std::move(pair.target);
    s.factor = raw::packing_stride(cfa);
    char id[64];
    std::snprintf(id, sizeof id, "%s_%04lld", prefix.c_str(), static_cast<long long>(i));
    s.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<AblationCell> default_grid() {
  return {
      {"sid", false, false},   {"sid-extra", false, false}, {"sid", true, false},
      {"sid", false, true},    {"sid", true, true},         {"gia", false, false},
      {"gia", true, false},    {"gia", false, true},        {"gia", true, true},
  };
}

std::vector<AblationCell> small_grid() {
  return {{"sid", false, false}, {"sid", true, false}, {"gia", false, false}, {"gia", true, false}};
}

std::vector<AblationRow> run_ablation(const std::vector<AblationCell>& grid, const TrainConfig& base,
                                      const std::vector<raw::Sample>& train_set,
                                      const std::vector<raw::Sample>& test_set) {
  std::vector<AblationRow> rows;
  int index = 0;
  for (const auto& cell : grid) {
    AblationRow row;
    row.index = ++index;
    row.cell = cell;
    try {
      TrainConfig cfg = base;
      cfg.variant = cell.variant;
      cfg.gamma = cell.msssim ? base.gamma : 1.0F;
      if (cell.msssim && cfg.gamma >= 1.0F) cfg.gamma = 0.84F;
      cfg.variable_patch = cell.aug;
      const int64_t in_ch = train_set.empty() ? 4 : train_set.front().input.tensor.shape().c;
      const auto arch = cfg.arch(in_ch);
      row.gia = arch.bottleneck == models::BottleneckKind::Gia;
      row.extra_convs = arch.bottleneck == models::BottleneckKind::ExtraConvs;
      const auto result = train(cfg, train_set);
      const auto net = restore_network(result.checkpoint);
      const auto metrics = evaluate(net, test_set, cfg.ssim());
      if (metrics.empty()) throw ConfigError("ablation: the test set is empty");
      for (const auto& m : metrics) {
        row.psnr_db += m.psnr_db;
        row.ssim += m.ssim;
      }
      row.psnr_db /= static_cast<double>(metrics.size());
      row.ssim /= static_cast<double>(metrics.size());
    } catch (const std::exception& e) {
      row.psnr_db = std::numeric_limits<double>::quiet_NaN();
      row.ssim = std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "no,variant,l1,gia,msssim,aug,extra_convs,psnr_db,ssim,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += std::to_string(r.index) + "," + r.cell.variant + ",1," + (r.gia ? "1" : "0") + "," +
           (r.cell.msssim ? "1" : "0") + "," + (r.cell.aug ? "1" : "0") + "," + (r.extra_convs ? "1" : "0") + "," +
           fmt(r.psnr_db) + "," + fmt(r.ssim) + "," + err + "\n";
  }
  return out;
}

}  // namespace gianet::train

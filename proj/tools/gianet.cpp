#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "gianet/container.hpp"
#include "gianet/cost.hpp"
#include "gianet/dataset.hpp"
#include "gianet/error.hpp"
#include "gianet/losses.hpp"
#include "gianet/models.hpp"
#include "gianet/parallel.hpp"
#include "gianet/raw_pipeline.hpp"
#include "gianet/trainer.hpp"

namespace fs = std::filesystem;
using namespace gianet;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kDivergence = 3 };

raw::Cfa parse_cfa(const std::string& s) {
  if (s == "bayer") return raw::Cfa::Bayer;
  if (s == "xtrans") return raw::Cfa::XTrans;
  throw ConfigError("--cfa must be bayer or xtrans, got '" + s + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  container::write_file(path, text);
}

// Binary 8-bit PPM of a clamped (1, 3, h, w) image.
void write_ppm(const fs::path& path, const Tensor& rgb) {
  const Shape s = rgb.shape();
  std::string out = "P6\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(3 * s.h * s.w));
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x) {
      for (int64_t c = 0; c < 3; ++c) {
        out.push_back(static_cast<char>(static_cast<uint8_t>(std::lround(rgb.at(0, c, y, x) * 255.0F))));
      }
    }
  }
  container::write_file(path, out);
}

struct Common {
  uint64_t seed = 0;
  int workers = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--workers", c.workers, "kernel threads (GIA_DETERMINISTIC=1 forces 1)")->check(CLI::NonNegativeNumber);
}

struct TrainFlags {
  train::TrainConfig cfg;
  bool no_flips = false;
  bool fixed_patch = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  auto& c = f.cfg;
  cmd->add_option("--variant", c.variant, "network variant")->capture_default_str();
  cmd->add_option("--width-scale", c.width_scale, "channel width multiplier")->capture_default_str();
  cmd->add_option("--depth", c.depth, "U-Net scales")->capture_default_str();
  cmd->add_option("--lr", c.lr_initial, "initial learning rate")->capture_default_str();
  cmd->add_option("--lr-decay", c.lr_decay_factor, "second-phase learning-rate factor")->capture_default_str();
  cmd->add_option("--epochs-per-phase", c.epochs_per_phase)->capture_default_str();
  cmd->add_option("--gamma", c.gamma, "l1 weight in the joint loss")->capture_default_str();
  cmd->add_option("--batch", c.batch_size)->capture_default_str();
  cmd->add_option("--patch-a", c.patch.a, "patch unit in packed pixels")->capture_default_str();
  cmd->add_option("--patch-b-min", c.patch.b_min)->capture_default_str();
  cmd->add_option("--patch-b-max", c.patch.b_max)->capture_default_str();
  cmd->add_flag("--no-flips", f.no_flips, "disable flips and transposes");
  cmd->add_flag("--fixed-patch", f.fixed_patch, "always crop at b_min");
  cmd->add_option("--ssim-levels", c.ssim_levels)->capture_default_str();
  cmd->add_option("--max-steps", c.max_steps, "stop early after this many steps (0: full schedule)")
      ->capture_default_str();
}

train::TrainConfig finish(TrainFlags& f, uint64_t seed) {
  f.cfg.seed = seed;
  if (f.no_flips) f.cfg.patch.flips = false;
  if (f.fixed_patch) f.cfg.variable_patch = false;
  f.cfg.validate();
  return f.cfg;
}

int run_count(const std::string& variant_name, int64_t in_ch, const std::string& res, double width_scale,
              int64_t depth) {
  const auto r = nn::parse_resolution(res);
  auto config_for = [&](const std::string& name) {
    models::ArchConfig c = models::variant(name, in_ch);
    c.width_scale = width_scale;
    if (depth > 0) c.depth = depth;
    c.validate();
    return c;
  };
  const auto report = nn::cost_report(config_for(variant_name), r);
  const auto base = nn::cost_report(config_for("sid"), r);
  std::cout << report.table();
  std::printf("params %lld (%.2fM), flops %lld (%.2fB)\n", static_cast<long long>(report.params),
              static_cast<double>(report.params) / 1e6, static_cast<long long>(report.flops),
              static_cast<double>(report.flops) / 1e9);
  std::printf("params %.2fx, flops %.3fx\n", static_cast<double>(report.params) / static_cast<double>(base.params),
              static_cast<double>(report.flops) / static_cast<double>(base.flops));
  return kOk;
}

int run_eval_dirs(const fs::path& pred_dir, const fs::path& ref_dir, const fs::path& out, int levels) {
  std::map<std::string, fs::path> preds;
  for (const auto& e : fs::directory_iterator(pred_dir)) {
    if (e.path().extension() == ".giar") preds[e.path().stem().string()] = e.path();
  }
  if (preds.empty()) throw IoError("no .giar files in '" + pred_dir.string() + "'");
  losses::SsimParams p;
  p.levels = levels;
  std::vector<train::ImageMetrics> rows;
  for (const auto& [id, path] : preds) {
    const fs::path ref = ref_dir / path.filename();
    const auto a = container::read_image(path);
    const auto b = container::read_image(ref);
    rows.push_back(train::measure(a.tensor, b.tensor, id, p));
  }
  const std::string csv = train::metrics_csv(rows);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text(out, csv);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gianet: low-light raw imaging with global information"};
  app.require_subcommand(1);
  Common common;

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "pack, normalize and amplify a raw container");
  fs::path pre_in;
  fs::path pre_out;
  float pre_target = 10.0F;
  float pre_cap = raw::kDefaultRatioCap;
  pre->add_option("--in", pre_in, "raw .giar")->required();
  pre->add_option("--out", pre_out, "packed .giar")->required();
  pre->add_option("--target-exposure", pre_target, "seconds")->capture_default_str();
  pre->add_option("--ratio-cap", pre_cap)->capture_default_str();
  add_common(pre, common);

  // synth
  auto* syn = app.add_subcommand("synth", "write synthetic short/long pairs");
  int64_t syn_n = 8;
  int64_t syn_size = 256;
  std::string syn_cfa = "bayer";
  fs::path syn_out = "synth";
  raw::SynthParams syn_params;
  syn->add_option("--n", syn_n)->capture_default_str();
  syn->add_option("--size", syn_size, "raw side in pixels")->capture_default_str();
  syn->add_option("--cfa", syn_cfa, "bayer or xtrans")->capture_default_str();
  syn->add_option("--out", syn_out, "output directory")->capture_default_str();
  syn->add_option("--ratio", syn_params.ratio, "long / short exposure")->capture_default_str();
  syn->add_option("--color-cast", syn_params.color_cast)->capture_default_str();
  syn->add_option("--read-noise", syn_params.read_noise)->capture_default_str();
  syn->add_option("--shot-gain", syn_params.shot_gain)->capture_default_str();
  add_common(syn, common);

  // train
  auto* trn = app.add_subcommand("train", "train on a paired dataset directory");
  TrainFlags trn_flags;
  trn_flags.cfg.lr_initial = 1e-4;
  fs::path trn_data;
  fs::path trn_out = "run";
  fs::path trn_resume;
  int64_t trn_every = 0;
  trn->add_option("--data", trn_data, "directory of *_short.giar / *_target.giar pairs")->required();
  trn->add_option("--out", trn_out, "run directory")->capture_default_str();
  trn->add_option("--resume", trn_resume, "checkpoint to continue from");
  trn->add_option("--checkpoint-every", trn_every)->capture_default_str();
  add_train_flags(trn, trn_flags);
  add_common(trn, common);

  // eval
  auto* ev = app.add_subcommand("eval", "PSNR / SSIM / MS-SSIM metrics CSV");
  fs::path ev_pred;
  fs::path ev_ref;
  fs::path ev_ckpt;
  fs::path ev_data;
  fs::path ev_out;
  int ev_levels = 5;
  ev->add_option("--pred", ev_pred, "directory of predicted RGB .giar");
  ev->add_option("--ref", ev_ref, "directory of reference RGB .giar with matching names");
  ev->add_option("--checkpoint", ev_ckpt, "evaluate a trained network");
  ev->add_option("--data", ev_data, "paired dataset directory for --checkpoint");
  ev->add_option("--out", ev_out, "CSV path (default: stdout)");
  ev->add_option("--ssim-levels", ev_levels, "maximum MS-SSIM levels")->capture_default_str();
  add_common(ev, common);

  // infer
  auto* inf = app.add_subcommand("infer", "run a checkpoint on one raw container");
  fs::path inf_ckpt;
  fs::path inf_in;
  fs::path inf_out;
  fs::path inf_ppm;
  float inf_target = 10.0F;
  inf->add_option("--checkpoint", inf_ckpt)->required();
  inf->add_option("--in", inf_in, "raw .giar")->required();
  inf->add_option("--out", inf_out, "RGB .giar")->required();
  inf->add_option("--ppm", inf_ppm, "also write an 8-bit binary PPM");
  inf->add_option("--target-exposure", inf_target, "seconds")->capture_default_str();
  add_common(inf, common);

  // count
  auto* cnt = app.add_subcommand("count", "analytic parameter and FLOP counts");
  std::string cnt_variant = "sid";
  int64_t cnt_in = 4;
  std::string cnt_res = "4240x2832";
  double cnt_scale = 1.0;
  int64_t cnt_depth = 0;
  cnt->add_option("--variant", cnt_variant)->capture_default_str();
  cnt->add_option("--in-ch", cnt_in, "4 (Bayer) or 9 (X-Trans)")->capture_default_str();
  cnt->add_option("--res", cnt_res, "raw WIDTHxHEIGHT")->capture_default_str();
  cnt->add_option("--width-scale", cnt_scale)->capture_default_str();
  cnt->add_option("--depth", cnt_depth, "override the variant's depth");
  add_common(cnt, common);

  // ablate
  auto* abl = app.add_subcommand("ablate", "train and evaluate a grid of component choices");
  std::string abl_grid = "default";
  fs::path abl_out = "ablation.csv";
  int64_t abl_train_n = 8;
  int64_t abl_test_n = 4;
  int64_t abl_size = 128;
  raw::SynthParams abl_synth;
  abl_synth.color_cast = 0.3F;
  TrainFlags abl_flags;
  abl_flags.cfg.lr_initial = 1e-4;
  abl_flags.cfg.max_steps = 200;
  abl->add_option("--grid", abl_grid, "default (9 cells) or small (4 cells)")->capture_default_str();
  abl->add_option("--out", abl_out)->capture_default_str();
  abl->add_option("--train-n", abl_train_n)->capture_default_str();
  abl->add_option("--test-n", abl_test_n)->capture_default_str();
  abl->add_option("--size", abl_size, "raw side of synthetic scenes")->capture_default_str();
  abl->add_option("--color-cast", abl_synth.color_cast)->capture_default_str();
  add_train_flags(abl, abl_flags);
  add_common(abl, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    parallel::set_workers(common.workers);

    if (*pre) {
      const auto frame = container::read_raw(pre_in);
      const auto packed = raw::preprocess(frame, pre_target, pre_cap);
      container::ImageRecord rec;
      rec.kind = container::Kind::Packed;
      rec.cfa = frame.cfa;
      rec.black_level = frame.black_level;
      rec.white_level = frame.white_level;
      rec.exposure_s = frame.exposure_s;
      rec.ratio = packed.ratio;
      rec.tensor = packed.tensor;
      container::write(pre_out, rec);
      std::printf("ratio %g\nchannels %lld\n", static_cast<double>(packed.ratio),
                  static_cast<long long>(packed.tensor.shape().c));
      return kOk;
    }

    if (*syn) {
      const auto written =
          dataset::write_synth(syn_out, common.seed, syn_n, syn_size, parse_cfa(syn_cfa), syn_params);
      std::printf("wrote %zu pairs to %s\n", written.size(), syn_out.string().c_str());
      return kOk;
    }

    if (*trn) {
      const auto cfg = finish(trn_flags, common.seed);
      const auto data = dataset::load_pairs(trn_data);
      fs::create_directories(trn_out);
      train::Checkpoint resume;
      train::TrainOptions opts;
      if (!trn_resume.empty()) {
        resume = train::load_checkpoint(trn_resume);
        opts.resume = &resume;
      }
      opts.log_csv = trn_out / "loss.csv";
      opts.checkpoint_every = trn_every;
      opts.checkpoint_dir = trn_out / "checkpoints";
      const auto result = train::train(opts.resume != nullptr ? resume.train : cfg, data, opts);
      train::save_checkpoint(trn_out / "final.giac", result.checkpoint);
      if (!result.curve.empty()) {
        const auto& last = result.curve.back();
        std::printf("step %lld loss %.6g (l1 %.6g, ms-ssim %.6g)\n", static_cast<long long>(last.step),
                    static_cast<double>(last.total), static_cast<double>(last.l1_term),
                    static_cast<double>(last.msssim_term));
      }
      return kOk;
    }

    if (*ev) {
      if (!ev_pred.empty() || !ev_ref.empty()) {
        if (ev_pred.empty() || ev_ref.empty()) throw ConfigError("eval: --pred and --ref go together");
        return run_eval_dirs(ev_pred, ev_ref, ev_out, ev_levels);
      }
      if (ev_ckpt.empty() || ev_data.empty()) throw ConfigError("eval: give --pred/--ref or --checkpoint/--data");
      const auto ckpt = train::load_checkpoint(ev_ckpt);
      const auto net = train::restore_network(ckpt);
      losses::SsimParams p;
      p.levels = ev_levels;
      const std::string csv = train::metrics_csv(train::evaluate(net, dataset::load_pairs(ev_data), p));
      if (ev_out.empty()) {
        std::cout << csv;
      } else {
        write_text(ev_out, csv);
      }
      return kOk;
    }

    if (*inf) {
      const auto ckpt = train::load_checkpoint(inf_ckpt);
      const auto frame = container::read_raw(inf_in);
      const auto net = train::restore_network(ckpt);
      const auto input = raw::preprocess(frame, inf_target);
      Tensor rgb;
      {
        NoGradGuard off;
        rgb = models::clamp_unit(net.forward(input.tensor));
      }
      container::write(inf_out, container::rgb_record(rgb, inf_target));
      if (!inf_ppm.empty()) write_ppm(inf_ppm, rgb);
      std::printf("ratio %g\n", static_cast<double>(input.ratio));
      return kOk;
    }

    if (*cnt) return run_count(cnt_variant, cnt_in, cnt_res, cnt_scale, cnt_depth);

    if (*abl) {
      const auto cfg = finish(abl_flags, common.seed);
      std::vector<train::AblationCell> grid;
      if (abl_grid == "default") {
        grid = train::default_grid();
      } else if (abl_grid == "small") {
        grid = train::small_grid();
      } else {
        throw ConfigError("--grid must be default or small, got '" + abl_grid + "'");
      }
      const auto train_set = train::synth_dataset(common.seed, abl_train_n, abl_size, raw::Cfa::Bayer, abl_synth, "train");
      const auto test_set =
          train::synth_dataset(common.seed + 0x5eed, abl_test_n, abl_size, raw::Cfa::Bayer, abl_synth, "test");
      const auto rows = train::run_ablation(grid, cfg, train_set, test_set);
      write_text(abl_out, train::ablation_csv(rows));
      std::cout << train::ablation_csv(rows);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}

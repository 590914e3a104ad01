#include "gianet/dataset.hpp"

#include <algorithm>
#include <cstdio>

#include "gianet/container.hpp"
#include "gianet/error.hpp"

namespace gianet::dataset {

namespace {

constexpr std::string_view kShort = "_short.giar";
constexpr std::string_view kTarget = "_target.giar";

}  // namespace

std::vector<PairPaths> list_pairs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<PairPaths> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!name.ends_with(kShort)) continue;
    PairPaths p;
    p.id = name.substr(0, name.size() - kShort.size());
    p.short_raw = entry.path();
    p.target = dir / (p.id + std::string(kTarget));
    if (!std::filesystem::exists(p.target)) {
      throw IoError("'" + p.short_raw.string() + "' has no matching '" + p.target.string() + "'");
    }
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(), [](const PairPaths& a, const PairPaths& b) { return a.id < b.id; });
  if (out.empty()) throw IoError("no '*" + std::string(kShort) + "' files in '" + dir.string() + "'");
  return out;
}

std::vector<raw::Sample> load_pairs(const std::filesystem::path& dir, float ratio_cap) {
  std::vector<raw::Sample> out;
  for (const auto& p : list_pairs(dir)) {
    const auto frame = container::read_raw(p.short_raw);
    auto target = container::read_image(p.target);
    if (target.kind != container::Kind::Rgb) throw InconsistentError(p.target.string() + ": expected an RGB record");
    raw::Sample s;
    s.input = raw::preprocess(frame, target.exposure_s, ratio_cap);
    s.target = target.tensor;
    s.factor = raw::packing_stride(frame.cfa);
    s.id = p.id;
    const Shape in = s.input.tensor.shape();
    const Shape t = s.target.shape();
    if (t.h != in.h * s.factor || t.w != in.w * s.factor) {
      throw InconsistentError(p.target.string() + ": target " + t.str() + " does not match the raw frame " +
                              std::to_string(frame.height) + "x" + std::to_string(frame.width));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<PairPaths> write_synth(const std::filesystem::path& dir, uint64_t seed, int64_t count, int64_t size,
                                   raw::Cfa cfa, const raw::SynthParams& params, const std::string& prefix) {
  if (count < 1) throw ConfigError("synth: count must be >= 1");
  std::filesystem::create_directories(dir);
  std::vector<PairPaths> out;
  for (int64_t i = 0; i < count; ++i) {
    auto rng = raw::split_rng(seed, static_cast<uint64_t>(i));
    const auto pair = raw::synth_scene(rng, size, size, cfa, params);
    char id[64];
    std::snprintf(id, sizeof id, "%s_%04lld", prefix.c_str(), static_cast<long long>(i));
    PairPaths p{id, dir / (std::string(id) + std::string(kShort)), dir / (std::string(id) + std::string(kTarget))};
    container::write(p.short_raw, pair.short_frame);
    container::write(p.target, container::rgb_record(pair.target, params.long_exposure_s));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace gianet::dataset

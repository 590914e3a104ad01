#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gianet/raw_pipeline.hpp"

// On-disk paired dataset: "<id>_short.giar" (raw mosaic) next to
// "<id>_target.giar" (RGB record whose exposure is the long exposure).

namespace gianet::dataset {

struct PairPaths {
  std::string id;
  std::filesystem::path short_raw;
  std::filesystem::path target;
};

/// Pairs in `dir` sorted by id. A short frame without a target is an error.
std::vector<PairPaths> list_pairs(const std::filesystem::path& dir);

/// Reads and preprocesses each pair, amplifying to the target's exposure.
std::vector<raw::Sample> load_pairs(const std::filesystem::path& dir, float ratio_cap = raw::kDefaultRatioCap);

/// Writes `count` synthetic pairs; returns the paths written.
std::vector<PairPaths> write_synth(const std::filesystem::path& dir, uint64_t seed, int64_t count, int64_t size,
                                   raw::Cfa cfa, const raw::SynthParams& params = {},
                                   const std::string& prefix = "synth");

}  // namespace gianet::dataset

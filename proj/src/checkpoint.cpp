#include <cstring>

#include "gianet/bytes.hpp"
#include "gianet/container.hpp"
#include "gianet/error.hpp"
#include "gianet/keyvalue.hpp"
#include "gianet/trainer.hpp"

// Checkpoint layout, little-endian:
//
//   "GIAC" | u8 version
//   | u32 len | arch config text | u32 len | train config text
//   | u32 len | state text ("step = k", "adam_step = t")
//   | records until end of file:
//       u16 name length | name | u8 rank | rank x u32 dims | f32 payload
//
// Parameters keep their network names; Adam moments are stored as
// "adam.m/<name>" and "adam.v/<name>".

namespace gianet::train {

namespace {

constexpr std::string_view kMagic = "GIAC";
constexpr uint8_t kVersion = 1;
constexpr std::string_view kMomentM = "adam.m/";
constexpr std::string_view kMomentV = "adam.v/";

void put_text(bytes::Writer& w, const std::string& text) {
  w.put<uint32_t>(static_cast<uint32_t>(text.size()));
  w.raw(text);
}

std::string get_text(bytes::Reader& r, const char* what) {
  const auto n = r.get<uint32_t>(what);
  return std::string(r.raw(n, what));
}

void put_record(bytes::Writer& w, const std::string& name, const Shape& shape, std::span<const float> values) {
  if (name.size() > 0xFFFF) throw ConfigError("checkpoint: tensor name too long");
  w.put<uint16_t>(static_cast<uint16_t>(name.size()));
  w.raw(name);
  w.put<uint8_t>(4);
  for (int64_t d : {shape.n, shape.c, shape.h, shape.w}) w.put<uint32_t>(static_cast<uint32_t>(d));
  w.array(values);
}

bool same_bits(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
}

}  // namespace

bool Checkpoint::operator==(const Checkpoint& other) const {
  if (!(arch == other.arch) || !(train == other.train) || step != other.step || adam.step != other.adam.step) {
    return false;
  }
  if (params.size() != other.params.size()) return false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].first != other.params[i].first || !(params[i].second.shape() == other.params[i].second.shape()) ||
        !same_bits(params[i].second.data(), other.params[i].second.data())) {
      return false;
    }
  }
  auto same_moments = [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return false;
    for (const auto& [k, v] : a) {
      auto it = b.find(k);
      if (it == b.end() || !same_bits(v, it->second)) return false;
    }
    return true;
  };
  return same_moments(adam.m, other.adam.m) && same_moments(adam.v, other.adam.v);
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  bytes::Writer w;
  w.raw(kMagic);
  w.put<uint8_t>(kVersion);
  put_text(w, ckpt.arch.to_text());
  put_text(w, ckpt.train.to_text());
  put_text(w, "step = " + std::to_string(ckpt.step) + "\nadam_step = " + std::to_string(ckpt.adam.step) + "\n");
  for (const auto& [name, p] : ckpt.params) put_record(w, name, p.shape(), p.data());
  for (const auto& [name, p] : ckpt.params) {
    for (const auto& [prefix, moments] : {std::pair{kMomentM, &ckpt.adam.m}, std::pair{kMomentV, &ckpt.adam.v}}) {
      auto it = moments->find(name);
      if (it == moments->end()) continue;
      if (static_cast<int64_t>(it->second.size()) != p.numel()) {
        throw ShapeError("checkpoint: Adam moment for '" + name + "' has the wrong size");
      }
      put_record(w, std::string(prefix) + name, p.shape(), it->second);
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& data) {
  bytes::Reader r(data);
  if (r.remaining() < kMagic.size() || r.raw(kMagic.size(), "magic") != kMagic) {
    throw BadMagicError("checkpoint: missing GIAC magic");
  }
  const auto version = r.get<uint8_t>("version");
  if (version != kVersion) throw InconsistentError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  try {
    c.arch = models::ArchConfig::from_text(get_text(r, "arch config"));
    c.train = TrainConfig::from_text(get_text(r, "train config"));
    for (const auto& [key, value] : kv::parse(get_text(r, "state"))) {
      if (key == "step") {
        c.step = kv::parse_int(key, value);
      } else if (key == "adam_step") {
        c.adam.step = kv::parse_int(key, value);
      } else {
        throw InconsistentError("checkpoint: unknown state key '" + key + "'");
      }
    }
  } catch (const ConfigError& e) {
    throw InconsistentError(std::string("checkpoint: ") + e.what());
  }
  while (!r.done()) {
    const auto name_len = r.get<uint16_t>("record name length");
    std::string name(r.raw(name_len, "record name"));
    const auto rank = r.get<uint8_t>("record rank");
    if (rank < 1 || rank > 4) throw InconsistentError("checkpoint: record '" + name + "' has rank " + std::to_string(rank));
    int64_t dims[4] = {1, 1, 1, 1};
    for (int i = 4 - rank; i < 4; ++i) dims[i] = r.get<uint32_t>("record dims");
    const Shape shape{dims[0], dims[1], dims[2], dims[3]};
    std::vector<float> values(static_cast<std::size_t>(shape.numel()));
    r.array(std::span<float>(values), "record payload");
    if (name.starts_with(kMomentM)) {
      c.adam.m[name.substr(kMomentM.size())] = std::move(values);
    } else if (name.starts_with(kMomentV)) {
      c.adam.v[name.substr(kMomentV.size())] = std::move(values);
    } else {
      Tensor t = Tensor::leaf(shape, std::move(values));
      c.params.emplace_back(std::move(name), std::move(t));
    }
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  container::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(container::read_file(path));
  } catch (const BadMagicError& e) {
    throw BadMagicError(path.string() + ": " + e.what());
  } catch (const TruncatedError& e) {
    throw TruncatedError(path.string() + ": " + e.what());
  } catch (const InconsistentError& e) {
    throw InconsistentError(path.string() + ": " + e.what());
  }
}

}  // namespace gianet::train

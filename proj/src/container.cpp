#include "gianet/container.hpp"

#include <fstream>
#include <sstream>

#include "gianet/bytes.hpp"
#include "gianet/error.hpp"

namespace gianet::container {

namespace {

constexpr std::string_view kMagic = "GIAR";

void put_header(bytes::Writer& w, Kind kind, raw::Cfa cfa, int64_t h, int64_t width, float black, float white,
                float exposure) {
  w.raw(kMagic);
  w.put<uint8_t>(kVersion);
  w.put<uint8_t>(static_cast<uint8_t>(kind));
  w.put<uint8_t>(static_cast<uint8_t>(cfa));
  w.put<uint32_t>(static_cast<uint32_t>(h));
  w.put<uint32_t>(static_cast<uint32_t>(width));
  w.put<float>(black);
  w.put<float>(white);
  w.put<float>(exposure);
}

}  // namespace

std::string encode(const raw::RawFrame& frame) {
  frame.validate();
  bytes::Writer w;
  put_header(w, Kind::RawMosaic, frame.cfa, frame.height, frame.width, frame.black_level, frame.white_level,
             frame.exposure_s);
  w.array(std::span<const uint16_t>(frame.mosaic));
  return w.take();
}

std::string encode(const ImageRecord& image) {
  const Shape s = image.tensor.shape();
  if (s.n != 1) throw ShapeError("container: images must have batch 1, got " + s.str());
  if (image.kind == Kind::Rgb && s.c != 3) throw ShapeError("container: RGB record needs 3 channels, got " + s.str());
  if (image.kind == Kind::RawMosaic) throw ShapeError("container: raw mosaics are written from a RawFrame");
  bytes::Writer w;
  put_header(w, image.kind, image.cfa, s.h, s.w, image.black_level, image.white_level, image.exposure_s);
  if (image.kind == Kind::Packed) {
    w.put<uint32_t>(static_cast<uint32_t>(s.c));
    w.put<float>(image.ratio);
  }
  w.array(image.tensor.data());
  return w.take();
}

Record decode(const std::string& data) {
  bytes::Reader r(data);
  if (r.remaining() < kMagic.size() || r.raw(kMagic.size(), "magic") != kMagic) {
    throw BadMagicError("container: missing GIAR magic");
  }
  const auto version = r.get<uint8_t>("version");
  if (version != kVersion) {
    throw InconsistentError("container: unsupported version " + std::to_string(version));
  }
  const auto kind = r.get<uint8_t>("kind");
  const auto cfa_code = r.get<uint8_t>("cfa");
  const int64_t h = r.get<uint32_t>("height");
  const int64_t w = r.get<uint32_t>("width");
  const float black = r.get<float>("black_level");
  const float white = r.get<float>("white_level");
  const float exposure = r.get<float>("exposure_s");
  if (cfa_code > 2) throw InconsistentError("container: unknown cfa code " + std::to_string(cfa_code));
  const auto cfa = static_cast<raw::Cfa>(cfa_code);

  if (kind == static_cast<uint8_t>(Kind::RawMosaic)) {
    raw::RawFrame frame;
    frame.height = h;
    frame.width = w;
    frame.cfa = cfa;
    frame.black_level = black;
    frame.white_level = white;
    frame.exposure_s = exposure;
    frame.validate();
    frame.mosaic.resize(static_cast<std::size_t>(h * w));
    r.array(std::span<uint16_t>(frame.mosaic), "mosaic payload");
    if (!r.done()) throw InconsistentError("container: trailing bytes after mosaic payload");
    return frame;
  }
  if (kind != static_cast<uint8_t>(Kind::Rgb) && kind != static_cast<uint8_t>(Kind::Packed)) {
    throw InconsistentError("container: unknown kind " + std::to_string(kind));
  }
  ImageRecord image;
  image.kind = static_cast<Kind>(kind);
  image.cfa = cfa;
  image.black_level = black;
  image.white_level = white;
  image.exposure_s = exposure;
  int64_t channels = 3;
  if (image.kind == Kind::Packed) {
    channels = r.get<uint32_t>("channels");
    image.ratio = r.get<float>("ratio");
    if (channels < 1) throw InconsistentError("container: packed record with zero channels");
  }
  const auto count = static_cast<std::size_t>(channels * h * w);
  if (r.remaining() < count * sizeof(float)) {
    throw TruncatedError("container: image payload needs " + std::to_string(count * sizeof(float)) + " bytes, " +
                         std::to_string(r.remaining()) + " left");
  }
  std::vector<float> values(count);
  r.array(std::span<float>(values), "image payload");
  if (!r.done()) throw InconsistentError("container: trailing bytes after image payload");
  image.tensor = Tensor(Shape{1, channels, h, w}, std::move(values));
  return image;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

void write(const std::filesystem::path& path, const raw::RawFrame& frame) { write_file(path, encode(frame)); }

void write(const std::filesystem::path& path, const ImageRecord& image) { write_file(path, encode(image)); }

Record read(const std::filesystem::path& path) {
  try {
    return decode(read_file(path));
  } catch (const DataError& e) {
    // Re-throw with the path attached, keeping the error category.
    const std::string msg = path.string() + ": " + e.what();
    if (dynamic_cast<const BadMagicError*>(&e)) throw BadMagicError(msg);
    if (dynamic_cast<const TruncatedError*>(&e)) throw TruncatedError(msg);
    if (dynamic_cast<const InconsistentError*>(&e)) throw InconsistentError(msg);
    if (dynamic_cast<const IoError*>(&e)) throw;
    throw DataError(msg);
  }
}

raw::RawFrame read_raw(const std::filesystem::path& path) {
  auto rec = read(path);
  if (auto* f = std::get_if<raw::RawFrame>(&rec)) return std::move(*f);
  throw InconsistentError(path.string() + ": expected a raw mosaic record");
}

ImageRecord read_image(const std::filesystem::path& path) {
  auto rec = read(path);
  if (auto* im = std::get_if<ImageRecord>(&rec)) return std::move(*im);
  throw InconsistentError(path.string() + ": expected an image record");
}

ImageRecord rgb_record(const Tensor& rgb, float exposure_s) {
  ImageRecord rec;
  rec.kind = Kind::Rgb;
  rec.exposure_s = exposure_s;
  rec.tensor = rgb;
  return rec;
}

}  // namespace gianet::container

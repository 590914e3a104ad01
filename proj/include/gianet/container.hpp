#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "gianet/raw_pipeline.hpp"
#include "gianet/tensor.hpp"

// "GIAR v1" image container. All fields little-endian:
//
//   "GIAR" | u8 version | u8 kind | u8 cfa | u32 h | u32 w
//   | f32 black_level | f32 white_level | f32 exposure_s | payload
//
// kind 0: raw mosaic, payload h*w u16.
// kind 1: RGB image, payload 3*h*w f32 in CHW order.
// kind 2: packed network input, extension header u32 channels | f32 ratio,
//         then channels*h*w f32 in CHW order.

namespace gianet::container {

enum class Kind : uint8_t { RawMosaic = 0, Rgb = 1, Packed = 2 };

constexpr uint8_t kVersion = 1;

/// Image stored as kind 1 or kind 2, with the header metadata it carried.
struct ImageRecord {
  Kind kind = Kind::Rgb;
  raw::Cfa cfa = raw::Cfa::None;
  float black_level = 0.0F;
  float white_level = 1.0F;
  float exposure_s = 1.0F;
  float ratio = 1.0F;  // kind 2 only
  Tensor tensor;       // (1, c, h, w)
};

using Record = std::variant<raw::RawFrame, ImageRecord>;

std::string encode(const raw::RawFrame& frame);
std::string encode(const ImageRecord& image);
/// Distinct DataError subclasses for bad magic, truncation and inconsistent
/// headers.
Record decode(const std::string& bytes);

void write(const std::filesystem::path& path, const raw::RawFrame& frame);
void write(const std::filesystem::path& path, const ImageRecord& image);
Record read(const std::filesystem::path& path);

raw::RawFrame read_raw(const std::filesystem::path& path);
ImageRecord read_image(const std::filesystem::path& path);

/// RGB record (kind 1) for a (1, 3, h, w) tensor.
ImageRecord rgb_record(const Tensor& rgb, float exposure_s = 1.0F);

/// Reads a whole file; IoError naming the path when it cannot be opened.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace gianet::container

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace facetts::bio {

inline constexpr std::size_t kFaceSize = 224;

/// 8-bit interleaved RGB raster.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  std::uint8_t* at(std::size_t x, std::size_t y) { return &pixels[(y * width + x) * 3]; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const { return &pixels[(y * width + x) * 3]; }
};

/// 224 x 224 x 3 image in [0, 1], stored channel-major [3, 224, 224].
struct FaceImage {
  std::vector<double> chw;
};

RgbImage resize_nearest(const RgbImage& img, std::size_t width, std::size_t height);
FaceImage to_face(const RgbImage& img);

std::vector<std::uint8_t> encode_ppm(const RgbImage& img);
RgbImage decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const RgbImage& img);
RgbImage decode_png(std::span<const std::uint8_t> bytes);

void write_ppm(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const RgbImage& img);
/// Reads a P6 or PNG file (detected from its signature).
RgbImage read_image(const std::filesystem::path& path);
/// read_image, nearest-neighbour resized to 224 x 224, scaled to [0, 1].
FaceImage load_face(const std::filesystem::path& path);

}  // namespace facetts::bio

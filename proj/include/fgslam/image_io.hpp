#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fgslam {

struct Rgb8Image {
  int width = 0, height = 0;
  std::vector<uint8_t> pixels;  // row-major, 3 bytes per pixel
};

struct Gray16Image {
  int width = 0, height = 0;
  std::vector<uint16_t> pixels;  // row-major
};

Rgb8Image read_png_rgb8(const std::filesystem::path& path);
void write_png_rgb8(const std::filesystem::path& path, const Rgb8Image& img);

/// 16-bit single-channel PNG, the on-disk depth format.
Gray16Image read_png_gray16(const std::filesystem::path& path);
void write_png_gray16(const std::filesystem::path& path, const Gray16Image& img);

}  // namespace fgslam

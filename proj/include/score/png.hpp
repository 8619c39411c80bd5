#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace score {

// 8-bit RGB image, row-major, 3 bytes per pixel.
struct RgbImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;
};

std::string encode_png(const RgbImage& img);

}  // namespace score

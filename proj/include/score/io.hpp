#pragma once

#include <cstdint>
#include <filesystem>

#include "score/volume.hpp"

namespace score {

// SVOL container: "SVOL" | u16 version=1 | u8 kind | u8 K | u32 nx,ny,nz |
// f32 sx,sy,sz | payload. All fields little-endian.
inline constexpr std::size_t kSvolHeaderBytes = 32;
inline constexpr std::uint16_t kSvolVersion = 1;

enum class SvolKind : std::uint8_t { FloatVolume = 0, MaskSet = 1 };

struct SvolHeader {
  SvolKind kind = SvolKind::FloatVolume;
  std::uint8_t regions = 1;
  Grid grid;
};

// Reads only the fixed header. Throws IoError / FormatError.
SvolHeader read_svol_header(const std::filesystem::path& path);

Volume3 read_volume(const std::filesystem::path& path);
void write_volume(const Volume3& v, const std::filesystem::path& path);

RegionMaskSet read_masks(const std::filesystem::path& path);
void write_masks(const RegionMaskSet& masks, const std::filesystem::path& path);

}  // namespace score

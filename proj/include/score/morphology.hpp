#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "score/volume.hpp"

namespace score {

// Per-region error type reported by a rater.
enum class ErrorLabel : int { Under = -1, None = 0, Over = 1, Both = 2 };

// Throws LabelError for values outside {-1,0,1,2}.
ErrorLabel error_label_from_int(int l);
bool is_valid_error_label(int l);

struct Offset3 {
  int dx, dy, dz;
};

// Offsets d with |d|_2 <= radius, in voxel units.
std::vector<Offset3> ball_offsets(int radius);

Mask erode(const Mask& mask, int eta);
Mask dilate(const Mask& mask, int eta);

struct RegionBands {
  Mask stab;
  Mask corr;
};

// Stability interior and correction band for one region. For a region
// rated perfect (None) the stability area is the whole mask.
RegionBands make_bands(const Mask& mask, ErrorLabel label, int eta);

// Per-voxel integer radii.
struct RadiusField {
  Grid grid;
  std::vector<std::uint8_t> radius;

  RadiusField() = default;
  explicit RadiusField(const Grid& g, std::uint8_t fill = 0)
      : grid(g), radius(g.size(), fill) {}
  int max_radius() const;
};

enum class MorphMode { Erode, Dilate };

// Spatially varying erosion/dilation. Dilation stamps ball(v, r[v]) for
// every mask voxel v; erosion keeps v iff ball(v, r[v]) lies inside the mask.
Mask morph_varying(const Mask& mask, const RadiusField& field, MorphMode mode);

}  // namespace score

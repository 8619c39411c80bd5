#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace score {

struct VoxelIndex {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;
  bool operator==(const VoxelIndex&) const = default;
};

// Shape and physical spacing (mm) of a voxel grid. Storage is x-fastest:
// offset = x + nx * (y + ny * z).
struct Grid {
  std::array<std::uint32_t, 3> dims{1, 1, 1};
  std::array<float, 3> spacing{1.f, 1.f, 1.f};

  Grid() = default;
  Grid(std::uint32_t nx, std::uint32_t ny, std::uint32_t nz,
       std::array<float, 3> sp = {1.f, 1.f, 1.f});

  std::int64_t nx() const { return dims[0]; }
  std::int64_t ny() const { return dims[1]; }
  std::int64_t nz() const { return dims[2]; }
  std::size_t size() const {
    return std::size_t(dims[0]) * dims[1] * dims[2];
  }
  std::size_t offset(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return std::size_t(x + nx() * (y + ny() * z));
  }
  std::size_t offset(const VoxelIndex& v) const { return offset(v.x, v.y, v.z); }
  VoxelIndex index(std::size_t off) const;
  bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx() && y < ny() && z < nz();
  }
  double voxel_volume() const {
    return double(spacing[0]) * spacing[1] * spacing[2];
  }

  // Throws DataError when a dimension is zero or a spacing is not > 0.
  void validate() const;

  bool operator==(const Grid&) const = default;
};

// Throws GridError when the two grids differ.
void require_same_grid(const Grid& a, const Grid& b, const char* what);

// Scalar 32-bit volume: intensity image, boundary prior, ...
class Volume3 {
 public:
  Volume3() = default;
  explicit Volume3(const Grid& grid, float fill = 0.f);
  // Throws DataError on size mismatch or non-finite values.
  Volume3(const Grid& grid, std::vector<float> data);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }
  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }
  float at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return data_[grid_.offset(x, y, z)];
  }
  float& at(std::int64_t x, std::int64_t y, std::int64_t z) {
    return data_[grid_.offset(x, y, z)];
  }

  bool operator==(const Volume3&) const = default;

 private:
  Grid grid_;
  std::vector<float> data_;
};

// Binary volume with values exactly 0 or 1.
class Mask {
 public:
  Mask() = default;
  explicit Mask(const Grid& grid, std::uint8_t fill = 0);
  // Throws DataError on size mismatch or values outside {0,1}.
  Mask(const Grid& grid, std::vector<std::uint8_t> data);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }
  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }
  std::uint8_t& operator[](std::size_t i) { return data_[i]; }
  std::uint8_t at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return data_[grid_.offset(x, y, z)];
  }
  std::uint8_t& at(std::int64_t x, std::int64_t y, std::int64_t z) {
    return data_[grid_.offset(x, y, z)];
  }

  std::size_t count() const;
  bool empty_set() const { return count() == 0; }
  bool subset_of(const Mask& other) const;

  bool operator==(const Mask&) const = default;

 private:
  Grid grid_;
  std::vector<std::uint8_t> data_;
};

Mask mask_and(const Mask& a, const Mask& b);
Mask mask_or(const Mask& a, const Mask& b);
Mask mask_and_not(const Mask& a, const Mask& b);
Mask mask_not(const Mask& a);

// K binary masks sharing one grid.
class RegionMaskSet {
 public:
  RegionMaskSet() = default;
  // Throws DataError when empty or grids disagree.
  explicit RegionMaskSet(std::vector<Mask> masks);
  RegionMaskSet(const Grid& grid, std::size_t k);

  const Grid& grid() const { return grid_; }
  std::size_t regions() const { return masks_.size(); }
  const Mask& operator[](std::size_t k) const { return masks_[k]; }
  Mask& operator[](std::size_t k) { return masks_[k]; }
  const std::vector<Mask>& masks() const { return masks_; }

  bool operator==(const RegionMaskSet&) const = default;

 private:
  Grid grid_;
  std::vector<Mask> masks_;
};

// Per-region soft predictions in 64-bit, one channel per region.
struct ProbabilityMaps {
  Grid grid;
  std::vector<std::vector<double>> channels;

  ProbabilityMaps() = default;
  ProbabilityMaps(const Grid& g, std::size_t k, double fill = 0.0)
      : grid(g), channels(k, std::vector<double>(g.size(), fill)) {}
  std::size_t regions() const { return channels.size(); }
};

// Axis-aligned box [lo, hi) in voxel coordinates.
struct Box {
  std::array<std::int64_t, 3> lo{0, 0, 0};
  std::array<std::int64_t, 3> hi{0, 0, 0};
  bool empty() const { return hi[0] <= lo[0] || hi[1] <= lo[1] || hi[2] <= lo[2]; }
  Grid grid(const std::array<float, 3>& spacing) const;
  bool operator==(const Box&) const = default;
};

Box full_box(const Grid& g);
// Tight box around the mask's foreground; empty box for an empty mask.
Box bounding_box(const Mask& m);
Box bounding_box(const RegionMaskSet& m);
// Grow by `margin` on every side, clipped to the grid.
Box expand(const Box& b, std::int64_t margin, const Grid& g);

Volume3 crop(const Volume3& v, const Box& b);
Mask crop(const Mask& m, const Box& b);
RegionMaskSet crop(const RegionMaskSet& m, const Box& b);

// Threshold each channel at `threshold` (strictly greater is foreground).
RegionMaskSet binarize(const ProbabilityMaps& maps, double threshold = 0.5);

}  // namespace score

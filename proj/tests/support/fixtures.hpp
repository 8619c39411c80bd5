#pragma once

#include <random>
#include <vector>

#include "score/volume.hpp"

namespace fixture {

using score::Grid;
using score::Mask;

// i.i.d. voxels with the given foreground density.
inline Mask random_mask(const Grid& g, std::mt19937_64& rng, double density) {
  std::bernoulli_distribution b(density);
  Mask m(g);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = b(rng);
  return m;
}

// Union of a few random balls: blobby masks with real interiors.
inline Mask random_blobs(const Grid& g, std::mt19937_64& rng, int blobs = 3) {
  Mask m(g);
  std::uniform_real_distribution<double> ux(0, double(g.nx())), uy(0, double(g.ny())),
      uz(0, double(g.nz()));
  const double rmax = double(std::min({g.nx(), g.ny(), g.nz()})) / 3.0;
  std::uniform_real_distribution<double> ur(1.0, std::max(1.5, rmax));
  for (int b = 0; b < blobs; ++b) {
    const double cx = ux(rng), cy = uy(rng), cz = uz(rng), r = ur(rng);
    for (std::int64_t z = 0; z < g.nz(); ++z)
      for (std::int64_t y = 0; y < g.ny(); ++y)
        for (std::int64_t x = 0; x < g.nx(); ++x) {
          const double dx = double(x) - cx, dy = double(y) - cy, dz = double(z) - cz;
          if (dx * dx + dy * dy + dz * dz <= r * r) m.at(x, y, z) = 1;
        }
  }
  return m;
}

inline Mask cube(const Grid& g, std::int64_t lo, std::int64_t hi) {
  Mask m(g);
  for (std::int64_t z = lo; z < hi; ++z)
    for (std::int64_t y = lo; y < hi; ++y)
      for (std::int64_t x = lo; x < hi; ++x) m.at(x, y, z) = 1;
  return m;
}

// Clears every voxel within `width` of the grid boundary.
inline Mask with_empty_border(Mask m, std::int64_t width) {
  const Grid& g = m.grid();
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x)
        if (x < width || y < width || z < width || x >= g.nx() - width || y >= g.ny() - width ||
            z >= g.nz() - width)
          m.at(x, y, z) = 0;
  return m;
}

inline score::Volume3 random_volume(const Grid& g, std::mt19937_64& rng, double lo = 0.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  score::Volume3 v(g);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = float(u(rng));
  return v;
}

}  // namespace fixture

#include "score/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "score/errors.hpp"

namespace score {

Grid::Grid(std::uint32_t nx, std::uint32_t ny, std::uint32_t nz,
           std::array<float, 3> sp)
    : dims{nx, ny, nz}, spacing(sp) {}

VoxelIndex Grid::index(std::size_t off) const {
  const auto o = std::int64_t(off);
  return {o % nx(), (o / nx()) % ny(), o / (nx() * ny())};
}

void Grid::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] == 0) throw DataError("grid dimension is zero");
    if (!(spacing[a] > 0.f) || !std::isfinite(spacing[a]))
      throw DataError("grid spacing must be finite and > 0");
  }
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (a != b) throw GridError(std::string("grid mismatch: ") + what);
}

Volume3::Volume3(const Grid& grid, float fill)
    : grid_(grid), data_(grid.size(), fill) {
  grid_.validate();
}

Volume3::Volume3(const Grid& grid, std::vector<float> data)
    : grid_(grid), data_(std::move(data)) {
  grid_.validate();
  if (data_.size() != grid_.size())
    throw DataError("volume payload length does not match dims");
  for (float v : data_)
    if (!std::isfinite(v)) throw DataError("volume contains non-finite value");
}

Mask::Mask(const Grid& grid, std::uint8_t fill)
    : grid_(grid), data_(grid.size(), fill ? 1 : 0) {
  grid_.validate();
}

Mask::Mask(const Grid& grid, std::vector<std::uint8_t> data)
    : grid_(grid), data_(std::move(data)) {
  grid_.validate();
  if (data_.size() != grid_.size())
    throw DataError("mask payload length does not match dims");
  for (auto v : data_)
    if (v > 1) throw DataError("mask value outside {0,1}");
}

std::size_t Mask::count() const {
  return std::size_t(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

bool Mask::subset_of(const Mask& other) const {
  require_same_grid(grid_, other.grid_, "subset_of");
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (data_[i] && !other.data_[i]) return false;
  return true;
}

namespace {
template <typename Op>
Mask combine(const Mask& a, const Mask& b, Op op) {
  require_same_grid(a.grid(), b.grid(), "mask combine");
  Mask out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]) ? 1 : 0;
  return out;
}
}  // namespace

Mask mask_and(const Mask& a, const Mask& b) {
  return combine(a, b, [](auto x, auto y) { return x && y; });
}
Mask mask_or(const Mask& a, const Mask& b) {
  return combine(a, b, [](auto x, auto y) { return x || y; });
}
Mask mask_and_not(const Mask& a, const Mask& b) {
  return combine(a, b, [](auto x, auto y) { return x && !y; });
}
Mask mask_not(const Mask& a) {
  Mask out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ? 0 : 1;
  return out;
}

RegionMaskSet::RegionMaskSet(std::vector<Mask> masks) : masks_(std::move(masks)) {
  if (masks_.empty()) throw DataError("mask set needs at least one region");
  grid_ = masks_.front().grid();
  for (const auto& m : masks_)
    if (m.grid() != grid_) throw DataError("mask set regions disagree on grid");
}

RegionMaskSet::RegionMaskSet(const Grid& grid, std::size_t k)
    : grid_(grid), masks_(k, Mask(grid)) {
  if (k == 0) throw DataError("mask set needs at least one region");
}

Grid Box::grid(const std::array<float, 3>& spacing) const {
  return Grid(std::uint32_t(hi[0] - lo[0]), std::uint32_t(hi[1] - lo[1]),
              std::uint32_t(hi[2] - lo[2]), spacing);
}

Box full_box(const Grid& g) { return {{0, 0, 0}, {g.nx(), g.ny(), g.nz()}}; }

Box bounding_box(const Mask& m) {
  const auto& g = m.grid();
  Box b{{g.nx(), g.ny(), g.nz()}, {0, 0, 0}};
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const auto v = g.index(i);
    const std::int64_t c[3] = {v.x, v.y, v.z};
    for (int a = 0; a < 3; ++a) {
      b.lo[a] = std::min(b.lo[a], c[a]);
      b.hi[a] = std::max(b.hi[a], c[a] + 1);
    }
  }
  if (b.empty()) return {};
  return b;
}

Box bounding_box(const RegionMaskSet& m) {
  Box out;
  for (const auto& mk : m.masks()) {
    const Box b = bounding_box(mk);
    if (b.empty()) continue;
    if (out.empty()) {
      out = b;
      continue;
    }
    for (int a = 0; a < 3; ++a) {
      out.lo[a] = std::min(out.lo[a], b.lo[a]);
      out.hi[a] = std::max(out.hi[a], b.hi[a]);
    }
  }
  return out;
}

Box expand(const Box& b, std::int64_t margin, const Grid& g) {
  const std::int64_t n[3] = {g.nx(), g.ny(), g.nz()};
  Box out;
  for (int a = 0; a < 3; ++a) {
    out.lo[a] = std::max<std::int64_t>(0, b.lo[a] - margin);
    out.hi[a] = std::min(n[a], b.hi[a] + margin);
  }
  return out;
}

namespace {
template <typename T>
std::vector<T> crop_data(std::span<const T> src, const Grid& g, const Box& b) {
  if (b.empty()) throw GridError("crop box is empty");
  for (int a = 0; a < 3; ++a)
    if (b.lo[a] < 0 || b.hi[a] > std::int64_t(g.dims[a])) throw GridError("crop box outside grid");
  std::vector<T> out;
  out.reserve(std::size_t((b.hi[0] - b.lo[0]) * (b.hi[1] - b.lo[1]) * (b.hi[2] - b.lo[2])));
  for (auto z = b.lo[2]; z < b.hi[2]; ++z)
    for (auto y = b.lo[1]; y < b.hi[1]; ++y) {
      const auto row = src.begin() + std::ptrdiff_t(g.offset(b.lo[0], y, z));
      out.insert(out.end(), row, row + (b.hi[0] - b.lo[0]));
    }
  return out;
}
}  // namespace

Volume3 crop(const Volume3& v, const Box& b) {
  return Volume3(b.grid(v.grid().spacing), crop_data(v.data(), v.grid(), b));
}

Mask crop(const Mask& m, const Box& b) {
  return Mask(b.grid(m.grid().spacing), crop_data(m.data(), m.grid(), b));
}

RegionMaskSet crop(const RegionMaskSet& m, const Box& b) {
  std::vector<Mask> out;
  for (const auto& mk : m.masks()) out.push_back(crop(mk, b));
  return RegionMaskSet(std::move(out));
}

RegionMaskSet binarize(const ProbabilityMaps& maps, double threshold) {
  std::vector<Mask> out;
  out.reserve(maps.regions());
  for (const auto& ch : maps.channels) {
    Mask m(maps.grid);
    for (std::size_t i = 0; i < ch.size(); ++i) m[i] = ch[i] > threshold ? 1 : 0;
    out.push_back(std::move(m));
  }
  return RegionMaskSet(std::move(out));
}

}  // namespace score

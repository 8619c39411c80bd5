#include "score/morphology.hpp"

#include <algorithm>
#include <string>

#include "score/errors.hpp"

namespace score {

bool is_valid_error_label(int l) { return l >= -1 && l <= 2; }

ErrorLabel error_label_from_int(int l) {
  if (!is_valid_error_label(l))
    throw LabelError("error label must be one of -1, 0, 1, 2 (got " +
                     std::to_string(l) + ")");
  return ErrorLabel(l);
}

std::vector<Offset3> ball_offsets(int radius) {
  std::vector<Offset3> out;
  if (radius < 0) return out;
  const int r2 = radius * radius;
  for (int dz = -radius; dz <= radius; ++dz)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dx * dx + dy * dy + dz * dz <= r2) out.push_back({dx, dy, dz});
  return out;
}

namespace {

bool ball_inside(const Mask& mask, std::int64_t x, std::int64_t y, std::int64_t z,
                 const std::vector<Offset3>& ball) {
  const auto& g = mask.grid();
  for (const auto& o : ball) {
    const auto xx = x + o.dx, yy = y + o.dy, zz = z + o.dz;
    if (!g.contains(xx, yy, zz) || !mask.at(xx, yy, zz)) return false;
  }
  return true;
}

void stamp(Mask& out, std::int64_t x, std::int64_t y, std::int64_t z,
           const std::vector<Offset3>& ball) {
  const auto& g = out.grid();
  for (const auto& o : ball) {
    const auto xx = x + o.dx, yy = y + o.dy, zz = z + o.dz;
    if (g.contains(xx, yy, zz)) out.at(xx, yy, zz) = 1;
  }
}

}  // namespace

Mask erode(const Mask& mask, int eta) {
  if (eta <= 0) return mask;
  const auto ball = ball_offsets(eta);
  const auto& g = mask.grid();
  Mask out(g);
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x)
        if (mask.at(x, y, z) && ball_inside(mask, x, y, z, ball)) out.at(x, y, z) = 1;
  return out;
}

Mask dilate(const Mask& mask, int eta) {
  if (eta <= 0) return mask;
  const auto ball = ball_offsets(eta);
  const auto& g = mask.grid();
  Mask out(g);
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x)
        if (mask.at(x, y, z)) stamp(out, x, y, z, ball);
  return out;
}

RegionBands make_bands(const Mask& mask, ErrorLabel label, int eta) {
  error_label_from_int(int(label));
  const Mask eroded = erode(mask, eta);
  RegionBands bands;
  bands.corr = mask_and_not(dilate(mask, eta), eroded);
  bands.stab = label == ErrorLabel::None ? mask : eroded;
  return bands;
}

int RadiusField::max_radius() const {
  return radius.empty() ? 0 : *std::max_element(radius.begin(), radius.end());
}

Mask morph_varying(const Mask& mask, const RadiusField& field, MorphMode mode) {
  require_same_grid(mask.grid(), field.grid, "morph_varying radius field");
  const auto& g = mask.grid();
  std::vector<std::vector<Offset3>> balls;
  for (int r = 0; r <= field.max_radius(); ++r) balls.push_back(ball_offsets(r));

  Mask out(g);
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x) {
        const auto off = g.offset(x, y, z);
        if (!mask[off]) continue;
        const auto& ball = balls[field.radius[off]];
        if (mode == MorphMode::Dilate)
          stamp(out, x, y, z, ball);
        else if (ball_inside(mask, x, y, z, ball))
          out[off] = 1;
      }
  return out;
}

}  // namespace score

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "score/augment.hpp"
#include "score/volume.hpp"
#include "score/weaklabels.hpp"

namespace score {

struct Sphere {
  std::array<double, 3> center;
  double radius;
};

struct Capsule {
  std::array<double, 3> a, b;  // segment end points
  double radius;
};

struct Ellipsoid {
  std::array<double, 3> center;
  std::array<double, 3> semi_axes;
  std::array<double, 3> angles_deg;
};

using Shape = std::variant<Sphere, Capsule, Ellipsoid>;

enum class ShapeKind { Any, Sphere, Capsule, Ellipsoid, SphereOrCapsule };
enum class Regime { Random, Under, Over, Mixed, None };

struct PhantomConfig {
  Grid grid{48, 48, 48};
  ShapeKind shape = ShapeKind::Any;
  std::optional<Shape> fixed_shape;  // bypasses random shape sampling
  Range sphere_radius{8.0, 13.0};
  Range capsule_radius{5.0, 8.0};
  Range capsule_half_length{6.0, 13.0};
  Range ellipsoid_axis{6.0, 13.0};
  // Capsules run off the grid along z, emulating a partial field of view.
  bool truncated_fov = false;

  double fg_mean = 400.0, fg_sd = 30.0;
  double bg_mean = 50.0, bg_sd = 20.0;
  double blur_sigma = 0.8;
  double noise_sigma = 10.0;
  int margin = 4;
  int eta = 2;

  // Degradation of the initial mask.
  Regime regime = Regime::Random;
  int degrade_r_max = 3;
  int degrade_factor = 4;
  Range init_dice{0.75, 0.93};
  int max_retries = 64;
  ScoreBins bins{};

  std::uint64_t seed = 0;
  void validate() const;  // throws ConfigError
};

struct Phantom {
  Volume3 image;
  RegionMaskSet truth;
  Shape shape;
};

// Throws ConfigError when the shape plus eta-dilation does not fit with the
// configured margin.
Phantom make_phantom(const PhantomConfig& cfg, Rng& rng);
Mask rasterize(const Shape& shape, const Grid& grid);

struct SynthCase {
  Phantom phantom;
  RegionMaskSet initial;
  Regime regime = Regime::None;
  CaseRecord record;
};

// Phantom plus a degraded initial mask and simulated rater labels. Nothing is
// written to disk.
SynthCase make_case(const PhantomConfig& cfg, Rng& rng, const std::string& case_id);

// Writes <id>_image.svol, <id>_init.svol and <id>_gt.svol next to the
// manifest and appends the record.
CaseRecord write_case(const SynthCase& c, const std::filesystem::path& manifest);

struct DatasetSpec {
  std::string name;  // manifest stem, e.g. "train"
  std::size_t count = 0;
  PhantomConfig phantom;
  // Every n-th case (n > 0) is a capsule cut by the field of view.
  std::size_t truncated_every = 0;
};

// Deterministic in (seed, index). Replaces any existing manifest of the same name.
std::vector<CaseRecord> generate_dataset(const DatasetSpec& spec,
                                         const std::filesystem::path& dir);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace score

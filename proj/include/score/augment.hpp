#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "score/morphology.hpp"
#include "score/volume.hpp"

namespace score {

using Rng = std::mt19937_64;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct AugmentConfig {
  Range blur_sigma{0.0, 1.5};   // voxels
  Range noise_sigma{0.0, 0.1};  // fraction of the intensity range
  Range gamma{0.7, 1.5};
  double p_blur = 0.5;
  double p_noise = 0.5;
  double p_gamma = 0.5;

  double rot_deg = 10.0;  // per axis, symmetric
  Range scale{0.9, 1.1};
  double translate_vox = 5.0;  // per axis, symmetric
  double flip_lr_prob = 0.5;

  int morph_r_max = 3;
  int field_factor = 4;
  double morph_prob = 0.5;       // chance a non-perfect region is degraded
  double score_step = 0.02;      // relative volume change per score point
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// Gaussian smoothing with a kernel renormalized at the grid border.
Volume3 gaussian_blur(const Volume3& v, double sigma);
std::vector<double> gaussian_blur(const std::vector<double>& v, const Grid& g, double sigma);

Volume3 intensity_augment(const Volume3& img, const AugmentConfig& cfg, Rng& rng);

struct AffineParams {
  std::array<double, 3> angles_deg{0.0, 0.0, 0.0};  // about x, then y, then z
  double scale = 1.0;
  std::array<double, 3> translate{0.0, 0.0, 0.0};  // voxels
  bool flip_lr = false;                             // mirror along x
};

AffineParams sample_affine(const AugmentConfig& cfg, Rng& rng);

struct SpatialSample {
  Volume3 image;
  RegionMaskSet masks;
  Volume3 prior;
};

// One transform for all channels: trilinear for image and prior,
// nearest-neighbour for masks. Outside the grid: image min, prior 0, mask 0.
SpatialSample apply_spatial(const Volume3& img, const RegionMaskSet& masks,
                            const Volume3& prior, const AffineParams& params);
SpatialSample spatial_augment(const Volume3& img, const RegionMaskSet& masks,
                              const Volume3& prior, const AugmentConfig& cfg, Rng& rng);

// Correlated noise in [0,1]: uniform noise on a coarse grid, trilinearly
// upsampled, smoothed with sigma = factor / 2 and min-max renormalized.
std::vector<double> smooth_field(const Grid& grid, int factor, Rng& rng);

// Quantize a [0,1] field to radii {0..r_max}.
RadiusField quantize_radius(const std::vector<double>& field, const Grid& grid, int r_max);

struct MorphAugmentResult {
  Mask mask;
  int q = 0;
};

// Score update after a degradation: q - ceil(rho / step), floored at 0.
int updated_score(int q, std::size_t vol_before, std::size_t vol_after, double step);

// Degrade a region in the direction of its error label and lower its score.
// Regions rated perfect, and empty masks, come back unchanged.
MorphAugmentResult morph_augment(const Mask& mask, int q, int l, const AugmentConfig& cfg,
                                 Rng& rng);

// Same, with an explicit radius field (and split field for label 2).
MorphAugmentResult morph_augment_with(const Mask& mask, int q, int l,
                                      const RadiusField& radii,
                                      const std::vector<double>& split, double score_step);

}  // namespace score

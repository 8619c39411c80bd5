#pragma once

#include <optional>
#include <vector>

#include "score/volume.hpp"

namespace score {

// 2|A n B| / (|A| + |B|); 1 when both are empty.
double dice(const Mask& a, const Mask& b);

// Voxels of m with at least one 6-neighbour outside m (grid border = outside).
std::vector<VoxelIndex> surface_voxels(const Mask& m);

// Above this many surface voxels (both masks together) hd95 switches from
// the direct scan to a distance transform.
inline constexpr std::size_t kHd95ScanLimit = 10000;

// 95th percentile of the pooled directed surface distances, in mm.
// Throws UndefinedMetric if either mask is empty.
double hd95(const Mask& a, const Mask& b);

// Both evaluation routes, exposed so they can be cross-checked.
std::vector<double> surface_distances_scan(const Mask& from, const Mask& to);
std::vector<double> surface_distances_edt(const Mask& from, const Mask& to);
double hd95_scan(const Mask& a, const Mask& b);
double hd95_edt(const Mask& a, const Mask& b);

// Squared Euclidean distance (mm^2) from every voxel to the nearest site.
// Infinity everywhere if there are no sites.
std::vector<double> squared_edt(const Mask& sites);

struct RegionEval {
  double dice = 0.0;
  std::optional<double> hd95_mm;  // empty iff either mask is empty
  double vol_pred_mm3 = 0.0;
  double vol_ref_mm3 = 0.0;
};

struct EvalResult {
  std::vector<RegionEval> regions;
};

// Throws RegionCountError on K mismatch, GridError on grid mismatch.
EvalResult evaluate_case(const RegionMaskSet& pred, const RegionMaskSet& ref);
// Soft predictions are binarized at 0.5 first.
EvalResult evaluate_case(const ProbabilityMaps& pred, const RegionMaskSet& ref);

}  // namespace score

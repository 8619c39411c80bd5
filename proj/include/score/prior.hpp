#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "score/volume.hpp"

namespace score {

struct PriorConfig {
  int hist_bins = 256;
  double upper_percentile = 99.5;

  void validate() const;  // throws ConfigError
};

// Split index t in [1, bins-1] maximizing the between-class variance of the
// two classes {bins < t} and {bins >= t}. When consecutive splits tie for the
// maximum (empty bins), the middle of the first such run is taken (lower
// middle for even runs).
// Throws DegenerateImageError when no split separates two non-empty classes.
std::size_t otsu_split(std::span<const std::uint64_t> histogram);

// Histogram of the image over its own [min, max] range.
std::vector<std::uint64_t> intensity_histogram(const Volume3& img, int bins);

// Otsu threshold reported as a bin edge of the [min, max] histogram.
double otsu_threshold(const Volume3& img, int bins = 256);

// p-th percentile with linear interpolation at rank (p/100)(n-1).
double percentile(std::span<const float> values, double p);
double percentile(std::vector<double> values, double p);
double percentile(const Volume3& img, double p);

struct PriorResult {
  Volume3 map;
  double lower = 0.0;
  double upper = 0.0;
  // Set when the upper bound does not exceed the lower one; the map then
  // falls back to the indicator img > lower.
  bool degenerate = false;
};

PriorResult build_prior(const Volume3& img, const PriorConfig& cfg = {});

}  // namespace score

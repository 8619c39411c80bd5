#pragma once

#include <vector>

#include "score/morphology.hpp"
#include "score/volume.hpp"
#include "score/weaklabels.hpp"

namespace score {

struct LossWeights {
  double lambda_stab = 5.0;
  double lambda_plus = 1.0;
  double lambda_minus = 1.0;
  int eta = 2;
  double eps = 1e-7;
  // Two-sided cross-entropy on an extended stability area for regions rated
  // perfect (off = foreground-only term on the mask).
  bool stab_background = false;

  void validate() const;  // throws ConfigError
};

// Value and gradient of one loss term with respect to the probabilities.
struct LossTerm {
  double value = 0.0;
  std::vector<double> per_region;
  std::vector<std::vector<double>> grad;
};

struct RegionLoss {
  double stab = 0.0;
  double plus = 0.0;
  double minus = 0.0;
};

struct LossReport {
  double total = 0.0;
  double stab = 0.0;
  double plus = 0.0;
  double minus = 0.0;
  std::vector<RegionLoss> per_region;
  std::vector<std::vector<double>> grad;  // dL/dS-hat, one channel per region
};

// Stability/correction regions for every region of `init`.
std::vector<RegionBands> build_bands(const RegionMaskSet& init, const WeakLabelSet& labels,
                                     int eta, bool stab_background = false);

LossTerm loss_stab(const ProbabilityMaps& pred, const RegionMaskSet& init,
                   const std::vector<RegionBands>& bands, double eps = 1e-7,
                   bool two_sided = false);

// Expansion term, active only for regions labelled Under or Both.
LossTerm loss_plus(const ProbabilityMaps& pred, const Volume3& prior,
                   const std::vector<RegionBands>& bands, const WeakLabelSet& labels,
                   double eps = 1e-7);

// Removal term, active only for regions labelled Over or Both.
LossTerm loss_minus(const ProbabilityMaps& pred, const Volume3& prior,
                    const std::vector<RegionBands>& bands, const WeakLabelSet& labels,
                    double eps = 1e-7);

// Throws LabelError on invalid labels, GridError on grid mismatch.
LossReport total_loss(const ProbabilityMaps& pred, const RegionMaskSet& init,
                      const Volume3& prior, const WeakLabelSet& labels,
                      const LossWeights& weights = {});

// Same, with precomputed bands.
LossReport total_loss(const ProbabilityMaps& pred, const RegionMaskSet& init,
                      const Volume3& prior, const WeakLabelSet& labels,
                      const std::vector<RegionBands>& bands, const LossWeights& weights);

}  // namespace score

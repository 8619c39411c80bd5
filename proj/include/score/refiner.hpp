#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "score/volume.hpp"

namespace score {

struct RefinerConfig {
  std::size_t regions = 1;
  std::vector<int> widths{8, 8};
  int kernel = 3;
  // Residual: the output logit adds alpha * logit(clamp(S~, skip_eps)).
  bool skip = true;
  double skip_eps = 0.1;
  // He-uniform bound multiplier for the output convolution.
  double out_init_scale = 1.0;

  std::size_t in_channels() const { return regions + 2; }
  void validate() const;  // throws ConfigError
  bool operator==(const RefinerConfig&) const = default;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  void validate() const;  // throws ConfigError
};

// A named parameter array. Convolution weights are column-major
// [out_channels x (taps * in_channels)], column index = tap * in + channel,
// taps ordered z-major then y then x.
struct ParamTensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Network weights plus optimizer state. `version` advances with every
// parameter update so stale forward caches can be detected.
struct Refiner {
  RefinerConfig config;
  std::vector<ParamTensor> params;
  AdamState adam;
  std::uint64_t version = 0;

  std::size_t layer_count() const { return config.widths.size() + 1; }
  const ParamTensor& weight(std::size_t layer) const { return params[2 * layer]; }
  const ParamTensor& bias(std::size_t layer) const { return params[2 * layer + 1]; }
  double alpha() const { return params.back().value[0]; }
  std::size_t parameter_count() const;
};

// He-uniform conv weights (output layer scaled by out_init_scale), zero
// biases, alpha = 1, zeroed Adam moments.
Refiner make_refiner(const RefinerConfig& cfg, std::uint64_t seed);

// Stacked network input, channels x voxels: [I_norm, S~_1..S~_K, P].
struct RefinerInput {
  Grid grid;
  Eigen::MatrixXd channels;
};

// Zero mean / unit variance (constant images map to zero).
std::vector<double> normalize_intensity(const Volume3& image);

// Normalizes the image and stacks the channels. Throws ShapeError on grid
// or region-count mismatch.
RefinerInput make_refiner_input(const Volume3& image, const RegionMaskSet& init,
                                const Volume3& prior);
RefinerInput crop(const RefinerInput& in, const Box& b);

struct ForwardCache {
  std::uint64_t version = 0;
  Grid grid;
  std::vector<Eigen::MatrixXd> inputs;       // input activation of each layer
  std::vector<Eigen::MatrixXd> preact;       // pre-activation of each layer
  Eigen::MatrixXd skip_logit;                // K x N, zero when skip is off
  Eigen::MatrixXd logits;                    // K x N
  Eigen::MatrixXd prob;                      // K x N
};

struct ForwardResult {
  ProbabilityMaps prob;
  ForwardCache cache;
};

ForwardResult forward(const Refiner& net, const RefinerInput& in);
// Probabilities only; drops activations as it goes.
ProbabilityMaps predict(const Refiner& net, const RefinerInput& in);

// Gradients aligned with Refiner::params.
using Gradients = std::vector<std::vector<double>>;

// Reverse-mode gradients given dL/dS-hat. Throws CacheError if the cache
// was produced by a different parameter version, ShapeError on size mismatch.
Gradients backward(const Refiner& net, const ForwardCache& cache,
                   const std::vector<std::vector<double>>& grad_prob);

// Bias-corrected Adam. Throws NumericError on a non-finite gradient.
void adam_step(Refiner& net, const Gradients& grads, const AdamConfig& cfg);

}  // namespace score

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "score/refiner.hpp"
#include "score/scoreloss.hpp"

namespace gradcheck {

struct Problem {
  score::RefinerInput input;
  score::RegionMaskSet init;
  score::Volume3 prior;
  score::WeakLabelSet labels;
  score::LossWeights weights;
};

inline double loss_at(const score::Refiner& net, const Problem& pb) {
  const auto f = score::forward(net, pb.input);
  return score::total_loss(f.prob, pb.init, pb.prior, pb.labels, pb.weights).total;
}

inline bool same_relu_pattern(const score::ForwardCache& a, const score::ForwardCache& b) {
  for (std::size_t l = 0; l + 1 < a.preact.size(); ++l)
    for (Eigen::Index i = 0; i < a.preact[l].size(); ++i)
      if ((a.preact[l](i) > 0) != (b.preact[l](i) > 0)) return false;
  return true;
}

struct Outcome {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;  // samples redrawn because a ReLU switched
};

// Five-point central differences on `samples` randomly drawn scalar
// parameters, step h * max(1, |theta|).
// rel = |a - n| / max(|a|, |n|), with both below `floor` counted as agreement.
inline Outcome check(const score::Refiner& net, const Problem& pb, std::size_t samples,
                     std::mt19937_64& rng, double h = 1e-4, double floor = 1e-9) {
  const auto base = score::forward(net, pb.input);
  const auto loss = score::total_loss(base.prob, pb.init, pb.prior, pb.labels, pb.weights);
  const auto grads = score::backward(net, base.cache, loss.grad);

  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t t = 0; t < net.params.size(); ++t)
    for (std::size_t i = 0; i < net.params[t].value.size(); ++i) slots.emplace_back(t, i);
  std::shuffle(slots.begin(), slots.end(), rng);

  Outcome out;
  for (const auto& [t, i] : slots) {
    if (out.checked == samples) break;
    const double step = h * std::max(1.0, std::abs(double(net.params[t].value[i])));
    double f[4];
    bool kink = false;
    const double offsets[4] = {-2, -1, 1, 2};
    for (int j = 0; j < 4; ++j) {
      auto moved = net;
      moved.params[t].value[i] += offsets[j] * step;
      const auto fw = score::forward(moved, pb.input);
      if (!same_relu_pattern(base.cache, fw.cache)) {
        kink = true;
        break;
      }
      f[j] = score::total_loss(fw.prob, pb.init, pb.prior, pb.labels, pb.weights).total;
    }
    if (kink) {
      ++out.kinks;
      continue;
    }
    const double num = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * step);
    const double ana = grads[t][i];
    const double scale = std::max(std::abs(num), std::abs(ana));
    const double rel = scale < floor ? 0.0 : std::abs(num - ana) / scale;
    out.max_rel = std::max(out.max_rel, rel);
    ++out.checked;
  }
  return out;
}

}  // namespace gradcheck

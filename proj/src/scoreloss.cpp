#include "score/scoreloss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "score/errors.hpp"

namespace score {

void LossWeights::validate() const {
  if (lambda_stab < 0 || lambda_plus < 0 || lambda_minus < 0)
    throw ConfigError("loss weights must be non-negative");
  if (eta < 0) throw ConfigError("eta must be >= 0");
  if (!(eps > 0 && eps < 0.5)) throw ConfigError("eps must be in (0, 0.5)");
}

namespace {

void check_inputs(const ProbabilityMaps& pred, const Grid& g, std::size_t regions,
                  const std::vector<RegionBands>& bands) {
  require_same_grid(pred.grid, g, "loss prediction");
  if (pred.regions() != regions || bands.size() != regions)
    throw GridError("loss inputs disagree on region count");
  for (const auto& ch : pred.channels)
    if (ch.size() != g.size()) throw GridError("prediction channel has wrong length");
  for (const auto& b : bands) {
    require_same_grid(b.stab.grid(), g, "stability band");
    require_same_grid(b.corr.grid(), g, "correction band");
  }
}

double clamp_prob(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

bool expands(int l) { return l == -1 || l == 2; }
bool shrinks(int l) { return l == 1 || l == 2; }

// Shared shape of the two correction terms: mean over the band of
// -w * gate(P) * log(target(S-hat)), averaged over K.
template <bool Remove, typename Gate>
LossTerm correction_term(const ProbabilityMaps& pred, const Volume3& prior,
                         const std::vector<RegionBands>& bands, const WeakLabelSet& labels,
                         double eps, bool (*active)(int), Gate gate) {
  const std::size_t K = pred.regions();
  check_inputs(pred, prior.grid(), K, bands);
  LossTerm t;
  t.per_region.assign(K, 0.0);
  t.grad.assign(K, std::vector<double>(prior.size(), 0.0));
  for (std::size_t k = 0; k < K; ++k) {
    const auto& lab = label_for(labels, k);
    if (!active(lab.l)) continue;
    const double w = weight(lab.q);
    const auto& corr = bands[k].corr;
    const auto n = corr.count();
    if (n == 0 || w == 0.0) continue;
    const double norm = double(K) * double(n);
    double sum = 0.0;
    const auto& s = pred.channels[k];
    auto& g = t.grad[k];
    for (std::size_t v = 0; v < corr.size(); ++v) {
      if (!corr[v]) continue;
      const double gv = gate(double(prior[v]));
      const double p = clamp_prob(s[v], eps);
      if constexpr (Remove) {
        sum += -w * gv * std::log(1.0 - p);
        g[v] = w * gv / ((1.0 - p) * norm);
      } else {
        sum += -w * gv * std::log(p);
        g[v] = -w * gv / (p * norm);
      }
    }
    t.per_region[k] = sum / norm;
    t.value += t.per_region[k];
  }
  return t;
}

}  // namespace

std::vector<RegionBands> build_bands(const RegionMaskSet& init, const WeakLabelSet& labels,
                                     int eta, bool stab_background) {
  std::vector<RegionBands> out;
  out.reserve(init.regions());
  for (std::size_t k = 0; k < init.regions(); ++k) {
    const auto label = error_label_from_int(label_for(labels, k).l);
    auto b = make_bands(init[k], label, eta);
    if (stab_background && label == ErrorLabel::None) b.stab = dilate(init[k], eta);
    out.push_back(std::move(b));
  }
  return out;
}

LossTerm loss_stab(const ProbabilityMaps& pred, const RegionMaskSet& init,
                   const std::vector<RegionBands>& bands, double eps, bool two_sided) {
  const std::size_t K = pred.regions();
  check_inputs(pred, init.grid(), K, bands);
  if (init.regions() != K) throw GridError("loss inputs disagree on region count");
  LossTerm t;
  t.per_region.assign(K, 0.0);
  t.grad.assign(K, std::vector<double>(init.grid().size(), 0.0));
  for (std::size_t k = 0; k < K; ++k) {
    const auto& stab = bands[k].stab;
    const auto n = stab.count();
    if (n == 0) continue;
    const double norm = double(K) * double(n);
    const auto& s = pred.channels[k];
    const auto& m = init[k];
    auto& g = t.grad[k];
    double sum = 0.0;
    for (std::size_t v = 0; v < stab.size(); ++v) {
      if (!stab[v]) continue;
      const double p = clamp_prob(s[v], eps);
      const double target = m[v];
      sum += -target * std::log(p);
      g[v] = -target / (p * norm);
      if (two_sided) {
        sum += -(1.0 - target) * std::log(1.0 - p);
        g[v] += (1.0 - target) / ((1.0 - p) * norm);
      }
    }
    t.per_region[k] = sum / norm;
    t.value += t.per_region[k];
  }
  return t;
}

LossTerm loss_plus(const ProbabilityMaps& pred, const Volume3& prior,
                   const std::vector<RegionBands>& bands, const WeakLabelSet& labels,
                   double eps) {
  return correction_term<false>(pred, prior, bands, labels, eps, expands,
                                [](double p) { return p; });
}

LossTerm loss_minus(const ProbabilityMaps& pred, const Volume3& prior,
                    const std::vector<RegionBands>& bands, const WeakLabelSet& labels,
                    double eps) {
  return correction_term<true>(pred, prior, bands, labels, eps, shrinks,
                               [](double p) { return 1.0 - p; });
}

LossReport total_loss(const ProbabilityMaps& pred, const RegionMaskSet& init,
                      const Volume3& prior, const WeakLabelSet& labels,
                      const LossWeights& weights) {
  weights.validate();
  if (auto v = validate(labels, init.regions()); !v.empty())
    throw LabelError("invalid weak labels: " + v.front());
  const auto bands = build_bands(init, labels, weights.eta, weights.stab_background);
  return total_loss(pred, init, prior, labels, bands, weights);
}

LossReport total_loss(const ProbabilityMaps& pred, const RegionMaskSet& init,
                      const Volume3& prior, const WeakLabelSet& labels,
                      const std::vector<RegionBands>& bands, const LossWeights& weights) {
  require_same_grid(prior.grid(), init.grid(), "boundary prior");
  const auto st = loss_stab(pred, init, bands, weights.eps, weights.stab_background);
  const auto pl = loss_plus(pred, prior, bands, labels, weights.eps);
  const auto mi = loss_minus(pred, prior, bands, labels, weights.eps);

  LossReport r;
  r.stab = st.value;
  r.plus = pl.value;
  r.minus = mi.value;
  r.total = weights.lambda_stab * r.stab + weights.lambda_plus * r.plus +
            weights.lambda_minus * r.minus;
  const std::size_t K = pred.regions();
  r.per_region.resize(K);
  r.grad.assign(K, std::vector<double>(init.grid().size(), 0.0));
  for (std::size_t k = 0; k < K; ++k) {
    r.per_region[k] = {st.per_region[k], pl.per_region[k], mi.per_region[k]};
    auto& g = r.grad[k];
    for (std::size_t v = 0; v < g.size(); ++v)
      g[v] = weights.lambda_stab * st.grad[k][v] + weights.lambda_plus * pl.grad[k][v] +
             weights.lambda_minus * mi.grad[k][v];
  }
  return r;
}

}  // namespace score

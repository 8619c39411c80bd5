#include "score/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <boost/multiprecision/cpp_int.hpp>

#include "score/errors.hpp"

namespace score {

void PriorConfig::validate() const {
  if (hist_bins < 2) throw ConfigError("prior.hist_bins must be >= 2");
  if (!(upper_percentile > 0.0 && upper_percentile <= 100.0))
    throw ConfigError("prior.upper_percentile must be in (0, 100]");
}

std::size_t otsu_split(std::span<const std::uint64_t> hist) {
  // sigma_b^2 * N^2 = (n1*S0 - n0*S1)^2 / (n0*n1) on bin indices. Bin centers
  // are affine in the index so the argmax is unchanged. Candidates are
  // compared by cross-multiplication in exact integers.
  using boost::multiprecision::cpp_int;
  std::uint64_t total = 0;
  cpp_int total_sum = 0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    total += hist[i];
    total_sum += cpp_int(hist[i]) * i;
  }
  struct Score {
    cpp_int num, den;
  };
  std::vector<std::optional<Score>> scores(hist.size());
  std::uint64_t n0 = 0;
  cpp_int s0 = 0;
  std::optional<Score> best;
  for (std::size_t t = 1; t < hist.size(); ++t) {
    n0 += hist[t - 1];
    s0 += cpp_int(hist[t - 1]) * (t - 1);
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const cpp_int d = cpp_int(n1) * s0 - cpp_int(n0) * (total_sum - s0);
    Score sc{d * d, cpp_int(n0) * n1};
    if (!best || sc.num * best->den > best->num * sc.den) best = sc;
    scores[t] = std::move(sc);
  }
  if (!best) throw DegenerateImageError("histogram has a single occupied class");
  auto is_best = [&](std::size_t t) {
    return t < scores.size() && scores[t] && scores[t]->num * best->den == best->num * scores[t]->den;
  };
  // Empty bins between the classes leave the score flat; take the middle of
  // the first run of maximal splits.
  std::size_t first = 1;
  while (!is_best(first)) ++first;
  std::size_t last = first;
  while (is_best(last + 1)) ++last;
  return first + (last - first) / 2;
}

namespace {
std::pair<double, double> value_range(const Volume3& img) {
  if (img.size() == 0) throw DegenerateImageError("empty image");
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  return {double(*lo), double(*hi)};
}
}  // namespace

std::vector<std::uint64_t> intensity_histogram(const Volume3& img, int bins) {
  if (bins < 2) throw ConfigError("histogram needs >= 2 bins");
  const auto [lo, hi] = value_range(img);
  if (!(hi > lo)) throw DegenerateImageError("constant image has no Otsu threshold");
  std::vector<std::uint64_t> hist(std::size_t(bins), 0);
  const double width = (hi - lo) / bins;
  for (float v : img.data()) {
    auto b = std::int64_t((double(v) - lo) / width);
    b = std::clamp<std::int64_t>(b, 0, bins - 1);
    ++hist[std::size_t(b)];
  }
  return hist;
}

double otsu_threshold(const Volume3& img, int bins) {
  const auto hist = intensity_histogram(img, bins);
  const auto [lo, hi] = value_range(img);
  const std::size_t t = otsu_split(hist);
  return lo + double(t) * (hi - lo) / bins;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of empty set");
  p = std::clamp(p, 0.0, 100.0);
  const double rank = p / 100.0 * double(values.size() - 1);
  const auto lo = std::size_t(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + std::ptrdiff_t(lo), values.end());
  const double a = values[lo];
  if (hi == lo) return a;
  const double b = *std::min_element(values.begin() + std::ptrdiff_t(lo) + 1, values.end());
  return a + (rank - double(lo)) * (b - a);
}

double percentile(std::span<const float> values, double p) {
  return percentile(std::vector<double>(values.begin(), values.end()), p);
}

double percentile(const Volume3& img, double p) { return percentile(img.data(), p); }

PriorResult build_prior(const Volume3& img, const PriorConfig& cfg) {
  cfg.validate();
  PriorResult r;
  r.lower = otsu_threshold(img, cfg.hist_bins);
  r.upper = percentile(img, cfg.upper_percentile);
  r.map = Volume3(img.grid());
  auto out = r.map.data();
  const auto in = img.data();
  if (!(r.upper > r.lower)) {
    r.degenerate = true;
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = double(in[i]) > r.lower ? 1.f : 0.f;
    return r;
  }
  const double span = r.upper - r.lower;
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = float(std::clamp((double(in[i]) - r.lower) / span, 0.0, 1.0));
  return r;
}

}  // namespace score

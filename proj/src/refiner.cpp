#include "score/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "score/errors.hpp"

namespace score {

void RefinerConfig::validate() const {
  if (regions == 0) throw ConfigError("refiner needs at least one region");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("refiner kernel must be odd");
  for (int w : widths)
    if (w <= 0) throw ConfigError("refiner widths must be positive");
  if (!(skip_eps > 0 && skip_eps < 0.5)) throw ConfigError("skip_eps must be in (0, 0.5)");
  if (!(out_init_scale >= 0)) throw ConfigError("out_init_scale must be >= 0");
}

void AdamConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("adam lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw ConfigError("adam betas must be in [0,1)");
  if (!(eps > 0)) throw ConfigError("adam eps must be > 0");
}

std::size_t Refiner::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

Refiner make_refiner(const RefinerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Refiner net;
  net.config = cfg;
  std::mt19937_64 rng(seed);
  const std::size_t taps = std::size_t(cfg.kernel) * cfg.kernel * cfg.kernel;
  std::size_t in = cfg.in_channels();
  const std::size_t layers = cfg.widths.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const bool last = l + 1 == layers;
    const std::size_t out = last ? cfg.regions : std::size_t(cfg.widths[l]);
    const double fan_in = double(taps * in);
    const double bound = std::sqrt(6.0 / fan_in) * (last ? cfg.out_init_scale : 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ParamTensor w{"conv" + std::to_string(l) + ".weight", out, taps * in, {}};
    w.value.resize(w.rows * w.cols);
    for (auto& v : w.value) v = bound * u(rng);
    ParamTensor b{"conv" + std::to_string(l) + ".bias", out, 1,
                  std::vector<double>(out, 0.0)};
    net.params.push_back(std::move(w));
    net.params.push_back(std::move(b));
    in = out;
  }
  net.params.push_back({"alpha", 1, 1, {1.0}});
  for (const auto& p : net.params) {
    net.adam.m.emplace_back(p.value.size(), 0.0);
    net.adam.v.emplace_back(p.value.size(), 0.0);
  }
  return net;
}

std::vector<double> normalize_intensity(const Volume3& image) {
  const auto d = image.data();
  double mean = 0.0;
  for (float v : d) mean += v;
  mean /= double(d.size());
  double var = 0.0;
  for (float v : d) var += (double(v) - mean) * (double(v) - mean);
  var /= double(d.size());
  const double sd = std::sqrt(var);
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = sd > 0 ? (double(d[i]) - mean) / sd : 0.0;
  return out;
}

RefinerInput make_refiner_input(const Volume3& image, const RegionMaskSet& init,
                                const Volume3& prior) {
  if (image.grid() != init.grid() || image.grid() != prior.grid())
    throw ShapeError("refiner inputs do not share a grid");
  const std::size_t n = image.size();
  const std::size_t k = init.regions();
  RefinerInput in;
  in.grid = image.grid();
  in.channels.resize(Eigen::Index(k + 2), Eigen::Index(n));
  const auto norm = normalize_intensity(image);
  for (std::size_t i = 0; i < n; ++i) {
    in.channels(0, Eigen::Index(i)) = norm[i];
    for (std::size_t r = 0; r < k; ++r) in.channels(Eigen::Index(r + 1), Eigen::Index(i)) = init[r][i];
    in.channels(Eigen::Index(k + 1), Eigen::Index(i)) = prior[i];
  }
  return in;
}

RefinerInput crop(const RefinerInput& in, const Box& b) {
  const Grid g = b.grid(in.grid.spacing);
  RefinerInput out;
  out.grid = g;
  out.channels.resize(in.channels.rows(), Eigen::Index(g.size()));
  Eigen::Index j = 0;
  for (auto z = b.lo[2]; z < b.hi[2]; ++z)
    for (auto y = b.lo[1]; y < b.hi[1]; ++y)
      for (auto x = b.lo[0]; x < b.hi[0]; ++x)
        out.channels.col(j++) = in.channels.col(Eigen::Index(in.grid.offset(x, y, z)));
  return out;
}

namespace {

constexpr Eigen::Index kChunk = 4096;

struct Tap {
  int dx, dy, dz;
};

std::vector<Tap> taps_for(int kernel) {
  const int r = kernel / 2;
  std::vector<Tap> t;
  for (int dz = -r; dz <= r; ++dz)
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) t.push_back({dx, dy, dz});
  return t;
}

// Columns [n0, n0 + cols) of the zero-padded patch matrix.
void im2col(const Eigen::MatrixXd& a, const Grid& g, const std::vector<Tap>& taps,
            Eigen::Index n0, Eigen::Index cols, Eigen::MatrixXd& col) {
  const Eigen::Index c = a.rows();
  col.resize(c * Eigen::Index(taps.size()), cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const auto v = g.index(std::size_t(n0 + j));
    for (std::size_t t = 0; t < taps.size(); ++t) {
      const auto x = v.x + taps[t].dx, y = v.y + taps[t].dy, z = v.z + taps[t].dz;
      auto dst = col.block(Eigen::Index(t) * c, j, c, 1);
      if (g.contains(x, y, z))
        dst = a.col(Eigen::Index(g.offset(x, y, z)));
      else
        dst.setZero();
    }
  }
}

void col2im_add(const Eigen::MatrixXd& dcol, const Grid& g, const std::vector<Tap>& taps,
                Eigen::Index n0, Eigen::MatrixXd& da) {
  const Eigen::Index c = da.rows();
  for (Eigen::Index j = 0; j < dcol.cols(); ++j) {
    const auto v = g.index(std::size_t(n0 + j));
    for (std::size_t t = 0; t < taps.size(); ++t) {
      const auto x = v.x + taps[t].dx, y = v.y + taps[t].dy, z = v.z + taps[t].dz;
      if (g.contains(x, y, z))
        da.col(Eigen::Index(g.offset(x, y, z))) += dcol.block(Eigen::Index(t) * c, j, c, 1);
    }
  }
}

Eigen::Map<const Eigen::MatrixXd> as_matrix(const ParamTensor& p) {
  return {p.value.data(), Eigen::Index(p.rows), Eigen::Index(p.cols)};
}

Eigen::Map<const Eigen::VectorXd> as_vector(const ParamTensor& p) {
  return {p.value.data(), Eigen::Index(p.value.size())};
}

Eigen::MatrixXd conv(const Eigen::MatrixXd& a, const Grid& g, const std::vector<Tap>& taps,
                     const ParamTensor& w, const ParamTensor& b) {
  const auto n = a.cols();
  Eigen::MatrixXd out(Eigen::Index(w.rows), n);
  Eigen::MatrixXd col;
  const auto wm = as_matrix(w);
  const auto bv = as_vector(b);
  for (Eigen::Index n0 = 0; n0 < n; n0 += kChunk) {
    const auto cols = std::min(kChunk, n - n0);
    im2col(a, g, taps, n0, cols, col);
    out.middleCols(n0, cols).noalias() = wm * col;
    out.middleCols(n0, cols).colwise() += bv;
  }
  return out;
}

void check_input(const Refiner& net, const RefinerInput& in) {
  if (std::size_t(in.channels.rows()) != net.config.in_channels())
    throw ShapeError("refiner input has " + std::to_string(in.channels.rows()) +
                     " channels, expected " + std::to_string(net.config.in_channels()));
  if (std::size_t(in.channels.cols()) != in.grid.size())
    throw ShapeError("refiner input does not match its grid");
}

Eigen::MatrixXd skip_logits(const Refiner& net, const RefinerInput& in) {
  const auto k = Eigen::Index(net.config.regions);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, in.channels.cols());
  if (!net.config.skip) return s;
  const double e = net.config.skip_eps;
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index i = 0; i < s.cols(); ++i) {
      const double p = std::clamp(in.channels(r + 1, i), e, 1.0 - e);
      s(r, i) = std::log(p / (1.0 - p));
    }
  return s;
}

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

ProbabilityMaps to_maps(const Eigen::MatrixXd& prob, const Grid& g) {
  ProbabilityMaps maps(g, std::size_t(prob.rows()));
  for (Eigen::Index r = 0; r < prob.rows(); ++r)
    for (Eigen::Index i = 0; i < prob.cols(); ++i) maps.channels[std::size_t(r)][std::size_t(i)] = prob(r, i);
  return maps;
}

}  // namespace

ForwardResult forward(const Refiner& net, const RefinerInput& in) {
  check_input(net, in);
  const auto taps = taps_for(net.config.kernel);
  ForwardResult res;
  auto& c = res.cache;
  c.version = net.version;
  c.grid = in.grid;
  Eigen::MatrixXd a = in.channels;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Eigen::MatrixXd z = conv(a, in.grid, taps, net.weight(l), net.bias(l));
    c.inputs.push_back(std::move(a));
    a = l + 1 < net.layer_count() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    c.preact.push_back(std::move(z));
  }
  c.skip_logit = skip_logits(net, in);
  c.logits = a + net.alpha() * c.skip_logit;
  c.prob = c.logits.unaryExpr([](double z) { return sigmoid(z); });
  res.prob = to_maps(c.prob, in.grid);
  return res;
}

ProbabilityMaps predict(const Refiner& net, const RefinerInput& in) {
  check_input(net, in);
  const auto taps = taps_for(net.config.kernel);
  Eigen::MatrixXd a = in.channels;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Eigen::MatrixXd z = conv(a, in.grid, taps, net.weight(l), net.bias(l));
    a = l + 1 < net.layer_count() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
  }
  const Eigen::MatrixXd logits = a + net.alpha() * skip_logits(net, in);
  return to_maps(logits.unaryExpr([](double z) { return sigmoid(z); }), in.grid);
}

Gradients backward(const Refiner& net, const ForwardCache& cache,
                   const std::vector<std::vector<double>>& grad_prob) {
  if (cache.version != net.version || cache.inputs.size() != net.layer_count())
    throw CacheError("forward cache is stale for these parameters");
  const auto k = cache.prob.rows();
  const auto n = cache.prob.cols();
  if (grad_prob.size() != std::size_t(k)) throw ShapeError("gradient region count mismatch");
  for (const auto& g : grad_prob)
    if (g.size() != std::size_t(n)) throw ShapeError("gradient length mismatch");

  Gradients grads;
  for (const auto& p : net.params) grads.emplace_back(p.value.size(), 0.0);

  Eigen::MatrixXd dz(k, n);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = cache.prob(r, i);
      dz(r, i) = grad_prob[std::size_t(r)][std::size_t(i)] * p * (1.0 - p);
    }
  double dalpha = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index r = 0; r < k; ++r) dalpha += dz(r, i) * cache.skip_logit(r, i);
  grads.back()[0] = dalpha;

  const auto taps = taps_for(net.config.kernel);
  Eigen::MatrixXd dout = std::move(dz);
  Eigen::MatrixXd col, dcol;
  for (std::size_t l = net.layer_count(); l-- > 0;) {
    const auto& a = cache.inputs[l];
    const auto wm = as_matrix(net.weight(l));
    Eigen::Map<Eigen::MatrixXd> dw(grads[2 * l].data(), wm.rows(), wm.cols());
    Eigen::Map<Eigen::VectorXd> db(grads[2 * l + 1].data(), wm.rows());
    // Fixed summation order: Eigen's vectorized reductions group terms by
    // pointer alignment, which would make runs depend on heap layout.
    for (Eigen::Index r = 0; r < dout.rows(); ++r) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) acc += dout(r, i);
      db(r) = acc;
    }
    Eigen::MatrixXd da;
    if (l > 0) da = Eigen::MatrixXd::Zero(a.rows(), n);
    for (Eigen::Index n0 = 0; n0 < n; n0 += kChunk) {
      const auto cols = std::min(kChunk, n - n0);
      im2col(a, cache.grid, taps, n0, cols, col);
      dw.noalias() += dout.middleCols(n0, cols) * col.transpose();
      if (l > 0) {
        dcol.noalias() = wm.transpose() * dout.middleCols(n0, cols);
        col2im_add(dcol, cache.grid, taps, n0, da);
      }
    }
    if (l > 0) dout = (cache.preact[l - 1].array() > 0.0).select(da, 0.0);
  }
  return grads;
}

void adam_step(Refiner& net, const Gradients& grads, const AdamConfig& cfg) {
  cfg.validate();
  if (grads.size() != net.params.size()) throw ShapeError("gradient tensor count mismatch");
  for (std::size_t t = 0; t < grads.size(); ++t) {
    if (grads[t].size() != net.params[t].value.size())
      throw ShapeError("gradient shape mismatch for " + net.params[t].name);
    for (double g : grads[t])
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in " + net.params[t].name);
  }
  auto& st = net.adam;
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(st.step));
  for (std::size_t t = 0; t < grads.size(); ++t) {
    auto& w = net.params[t].value;
    auto& m = st.m[t];
    auto& v = st.v[t];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = grads[t][i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      w[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
  ++net.version;
}

}  // namespace score

#include "score/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "score/errors.hpp"

namespace score {

void AugmentConfig::validate() const {
  auto ordered = [](const Range& r, const char* name) {
    if (!(r.lo <= r.hi)) throw ConfigError(std::string("augment range not ordered: ") + name);
  };
  ordered(blur_sigma, "blur_sigma");
  ordered(noise_sigma, "noise_sigma");
  ordered(gamma, "gamma");
  ordered(scale, "scale");
  if (blur_sigma.lo < 0 || noise_sigma.lo < 0) throw ConfigError("augment sigmas must be >= 0");
  if (gamma.lo <= 0 || scale.lo <= 0) throw ConfigError("gamma and scale must be > 0");
  for (double p : {p_blur, p_noise, p_gamma, flip_lr_prob, morph_prob})
    if (p < 0 || p > 1) throw ConfigError("augment probabilities must be in [0,1]");
  if (morph_r_max < 0 || morph_r_max > 255) throw ConfigError("morph_r_max must be in 0..255");
  if (field_factor < 1) throw ConfigError("field_factor must be >= 1");
  if (!(score_step > 0)) throw ConfigError("score_step must be > 0");
}

namespace {

double draw(Rng& rng, const Range& r) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return r.lo + u * (r.hi - r.lo);
}

bool coin(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

std::vector<double> kernel(double sigma) {
  const int r = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> k(std::size_t(2 * r + 1));
  for (int i = -r; i <= r; ++i)
    k[std::size_t(i + r)] = std::exp(-0.5 * double(i * i) / (sigma * sigma));
  return k;
}

}  // namespace

std::vector<double> gaussian_blur(const std::vector<double>& v, const Grid& g, double sigma) {
  if (!(sigma > 0)) return v;
  const auto k = kernel(sigma);
  const int r = int(k.size() / 2);
  std::vector<double> cur = v, next(v.size());
  const std::int64_t n[3] = {g.nx(), g.ny(), g.nz()};
  const std::int64_t stride[3] = {1, g.nx(), g.nx() * g.ny()};
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t off = 0; off < cur.size(); ++off) {
      const auto idx = g.index(off);
      const std::int64_t pos = axis == 0 ? idx.x : axis == 1 ? idx.y : idx.z;
      double acc = 0.0, wsum = 0.0;
      for (int t = -r; t <= r; ++t) {
        const auto q = pos + t;
        if (q < 0 || q >= n[axis]) continue;
        const double w = k[std::size_t(t + r)];
        acc += w * cur[std::size_t(std::int64_t(off) + t * stride[axis])];
        wsum += w;
      }
      next[off] = acc / wsum;
    }
    std::swap(cur, next);
  }
  return cur;
}

Volume3 gaussian_blur(const Volume3& v, double sigma) {
  if (!(sigma > 0)) return v;
  const auto out = gaussian_blur(std::vector<double>(v.data().begin(), v.data().end()),
                                 v.grid(), sigma);
  return Volume3(v.grid(), std::vector<float>(out.begin(), out.end()));
}

Volume3 intensity_augment(const Volume3& img, const AugmentConfig& cfg, Rng& rng) {
  // Every draw happens unconditionally so the stream does not depend on
  // which perturbations fire.
  const bool do_blur = coin(rng, cfg.p_blur);
  const double blur = draw(rng, cfg.blur_sigma);
  const bool do_noise = coin(rng, cfg.p_noise);
  const double noise = draw(rng, cfg.noise_sigma);
  const bool do_gamma = coin(rng, cfg.p_gamma);
  const double gamma = draw(rng, cfg.gamma);
  const std::uint64_t noise_seed = rng();

  Volume3 out = img;
  if (do_blur && blur > 0) out = gaussian_blur(out, blur);

  const auto [lo_it, hi_it] = std::minmax_element(img.data().begin(), img.data().end());
  const double lo = *lo_it, hi = *hi_it, range = hi - lo;

  if (do_noise && noise > 0 && range > 0) {
    Rng nrng(noise_seed);
    std::normal_distribution<double> nd(0.0, noise * range);
    for (auto& v : out.data()) v = float(double(v) + nd(nrng));
  }
  if (do_gamma && gamma != 1.0) {
    const auto [a, b] = std::minmax_element(out.data().begin(), out.data().end());
    const double olo = *a, orange = double(*b) - olo;
    if (orange > 0)
      for (auto& v : out.data())
        v = float(std::pow((double(v) - olo) / orange, gamma) * orange + olo);
  }
  return out;
}

AffineParams sample_affine(const AugmentConfig& cfg, Rng& rng) {
  AffineParams p;
  for (auto& a : p.angles_deg) a = draw(rng, {-cfg.rot_deg, cfg.rot_deg});
  p.scale = draw(rng, cfg.scale);
  for (auto& t : p.translate) t = draw(rng, {-cfg.translate_vox, cfg.translate_vox});
  p.flip_lr = coin(rng, cfg.flip_lr_prob);
  return p;
}

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat3 rotation(const std::array<double, 3>& deg) {
  const double d2r = std::numbers::pi / 180.0;
  const double cx = std::cos(deg[0] * d2r), sx = std::sin(deg[0] * d2r);
  const double cy = std::cos(deg[1] * d2r), sy = std::sin(deg[1] * d2r);
  const double cz = std::cos(deg[2] * d2r), sz = std::sin(deg[2] * d2r);
  const Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  const Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  return matmul(rz, matmul(ry, rx));
}

double trilinear(std::span<const float> data, const Grid& g, double x, double y, double z,
                 double fill) {
  if (x < 0 || y < 0 || z < 0 || x > double(g.nx() - 1) || y > double(g.ny() - 1) ||
      z > double(g.nz() - 1))
    return fill;
  const auto x0 = std::int64_t(std::floor(x)), y0 = std::int64_t(std::floor(y)),
             z0 = std::int64_t(std::floor(z));
  const auto x1 = std::min(x0 + 1, g.nx() - 1), y1 = std::min(y0 + 1, g.ny() - 1),
             z1 = std::min(z0 + 1, g.nz() - 1);
  const double fx = x - double(x0), fy = y - double(y0), fz = z - double(z0);
  auto at = [&](std::int64_t a, std::int64_t b, std::int64_t c) {
    return double(data[g.offset(a, b, c)]);
  };
  // Exact lattice samples skip the blend.
  if (fx == 0 && fy == 0 && fz == 0) return at(x0, y0, z0);
  const double c00 = at(x0, y0, z0) * (1 - fx) + at(x1, y0, z0) * fx;
  const double c10 = at(x0, y1, z0) * (1 - fx) + at(x1, y1, z0) * fx;
  const double c01 = at(x0, y0, z1) * (1 - fx) + at(x1, y0, z1) * fx;
  const double c11 = at(x0, y1, z1) * (1 - fx) + at(x1, y1, z1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

}  // namespace

SpatialSample apply_spatial(const Volume3& img, const RegionMaskSet& masks,
                            const Volume3& prior, const AffineParams& params) {
  const Grid& g = img.grid();
  require_same_grid(g, masks.grid(), "spatial_augment masks");
  require_same_grid(g, prior.grid(), "spatial_augment prior");
  if (!(params.scale > 0)) throw ConfigError("affine scale must be > 0");

  // Output voxel q samples the input at R^T ((F(q) - c - t) / s) + c.
  const Mat3 r = rotation(params.angles_deg);
  const double c[3] = {double(g.nx() - 1) / 2, double(g.ny() - 1) / 2,
                       double(g.nz() - 1) / 2};
  const double img_min = *std::min_element(img.data().begin(), img.data().end());

  SpatialSample out{Volume3(g), RegionMaskSet(g, masks.regions()), Volume3(g)};
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x) {
        const double qx = params.flip_lr ? double(g.nx() - 1 - x) : double(x);
        const double d[3] = {(qx - c[0] - params.translate[0]) / params.scale,
                             (double(y) - c[1] - params.translate[1]) / params.scale,
                             (double(z) - c[2] - params.translate[2]) / params.scale};
        double p[3];
        for (int i = 0; i < 3; ++i)
          p[i] = r[0][i] * d[0] + r[1][i] * d[1] + r[2][i] * d[2] + c[i];
        const auto off = g.offset(x, y, z);
        out.image[off] = float(trilinear(img.data(), g, p[0], p[1], p[2], img_min));
        out.prior[off] = float(trilinear(prior.data(), g, p[0], p[1], p[2], 0.0));
        const auto nx_ = std::int64_t(std::llround(p[0]));
        const auto ny_ = std::int64_t(std::llround(p[1]));
        const auto nz_ = std::int64_t(std::llround(p[2]));
        if (g.contains(nx_, ny_, nz_))
          for (std::size_t k = 0; k < masks.regions(); ++k)
            out.masks[k][off] = masks[k].at(nx_, ny_, nz_);
      }
  return out;
}

SpatialSample spatial_augment(const Volume3& img, const RegionMaskSet& masks,
                              const Volume3& prior, const AugmentConfig& cfg, Rng& rng) {
  return apply_spatial(img, masks, prior, sample_affine(cfg, rng));
}

std::vector<double> smooth_field(const Grid& grid, int factor, Rng& rng) {
  if (factor < 1) throw ConfigError("smooth_field factor must be >= 1");
  const std::int64_t n[3] = {grid.nx(), grid.ny(), grid.nz()};
  std::int64_t m[3];
  for (int a = 0; a < 3; ++a) m[a] = (n[a] + factor - 1) / factor;
  const Grid coarse{std::uint32_t(m[0]), std::uint32_t(m[1]), std::uint32_t(m[2])};
  std::vector<float> noise(coarse.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : noise) v = float(u(rng));

  std::vector<double> field(grid.size());
  auto map = [&](std::int64_t i, int a) {
    return n[a] > 1 ? double(i) * double(m[a] - 1) / double(n[a] - 1) : 0.0;
  };
  for (std::int64_t z = 0; z < n[2]; ++z)
    for (std::int64_t y = 0; y < n[1]; ++y)
      for (std::int64_t x = 0; x < n[0]; ++x)
        field[grid.offset(x, y, z)] =
            trilinear(noise, coarse, map(x, 0), map(y, 1), map(z, 2), 0.0);

  field = gaussian_blur(field, grid, double(factor) / 2.0);
  const auto [a, b] = std::minmax_element(field.begin(), field.end());
  const double lo = *a, range = *b - *a;
  for (auto& v : field) v = range > 0 ? (v - lo) / range : 0.0;
  return field;
}

RadiusField quantize_radius(const std::vector<double>& field, const Grid& grid, int r_max) {
  RadiusField rf(grid);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const int r = int(std::floor(std::clamp(field[i], 0.0, 1.0) * double(r_max + 1)));
    rf.radius[i] = std::uint8_t(std::clamp(r, 0, r_max));
  }
  return rf;
}

int updated_score(int q, std::size_t vol_before, std::size_t vol_after, double step) {
  if (vol_before == 0) return q;
  const double rho = std::abs(double(vol_after) - double(vol_before)) / double(vol_before);
  const int drop = int(std::ceil(rho / step - 1e-12));
  return std::max(0, q - std::max(0, drop));
}

MorphAugmentResult morph_augment_with(const Mask& mask, int q, int l,
                                      const RadiusField& radii,
                                      const std::vector<double>& split, double score_step) {
  error_label_from_int(l);
  const auto before = mask.count();
  if (l == 0 || before == 0) return {mask, q};
  Mask out;
  if (l == -1) {
    out = morph_varying(mask, radii, MorphMode::Erode);
  } else if (l == 1) {
    out = morph_varying(mask, radii, MorphMode::Dilate);
  } else {
    if (split.size() != mask.size()) throw GridError("split field has wrong size");
    const Mask er = morph_varying(mask, radii, MorphMode::Erode);
    const Mask di = morph_varying(mask, radii, MorphMode::Dilate);
    out = Mask(mask.grid());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = split[i] < 0 ? er[i] : di[i];
  }
  return {out, updated_score(q, before, out.count(), score_step)};
}

MorphAugmentResult morph_augment(const Mask& mask, int q, int l, const AugmentConfig& cfg,
                                 Rng& rng) {
  error_label_from_int(l);
  if (l == 0 || mask.empty_set()) return {mask, q};
  const auto field = smooth_field(mask.grid(), cfg.field_factor, rng);
  const auto radii = quantize_radius(field, mask.grid(), cfg.morph_r_max);
  std::vector<double> split;
  if (l == 2) {
    split = smooth_field(mask.grid(), cfg.field_factor, rng);
    double mean = 0.0;
    for (double v : split) mean += v;
    mean /= double(split.size());
    for (double& v : split) v -= mean;
  }
  return morph_augment_with(mask, q, l, radii, split, cfg.score_step);
}

}  // namespace score

#include "score/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "score/errors.hpp"
#include "score/prior.hpp"

namespace score {

double dice(const Mask& a, const Mask& b) {
  require_same_grid(a.grid(), b.grid(), "dice");
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    nb += b[i];
    inter += a[i] & b[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(inter) / double(na + nb);
}

std::vector<VoxelIndex> surface_voxels(const Mask& m) {
  const auto& g = m.grid();
  static constexpr int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                   {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<VoxelIndex> out;
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x) {
        if (!m.at(x, y, z)) continue;
        for (const auto& d : nb) {
          const auto xx = x + d[0], yy = y + d[1], zz = z + d[2];
          if (!g.contains(xx, yy, zz) || !m.at(xx, yy, zz)) {
            out.push_back({x, y, z});
            break;
          }
        }
      }
  return out;
}

std::vector<double> surface_distances_scan(const Mask& from, const Mask& to) {
  require_same_grid(from.grid(), to.grid(), "surface distances");
  const auto sa = surface_voxels(from);
  const auto sb = surface_voxels(to);
  if (sa.empty() || sb.empty()) throw UndefinedMetric("surface distance of empty mask");
  const auto& sp = from.grid().spacing;
  std::vector<double> out;
  out.reserve(sa.size());
  for (const auto& a : sa) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : sb) {
      const double dx = double(a.x - b.x) * sp[0];
      const double dy = double(a.y - b.y) * sp[1];
      const double dz = double(a.z - b.z) * sp[2];
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    out.push_back(std::sqrt(best));
  }
  return out;
}

namespace {

// Lower envelope of parabolas along one line (Felzenszwalb & Huttenlocher),
// with sample spacing w.
void edt_line(std::vector<double>& f, double w, std::vector<double>& d,
              std::vector<std::int64_t>& v, std::vector<double>& z) {
  const auto n = std::int64_t(f.size());
  const double inf = std::numeric_limits<double>::infinity();
  const double w2 = w * w;
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[std::size_t(q)] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s;
    while (true) {
      const auto p = v[std::size_t(k)];
      s = ((f[std::size_t(q)] + w2 * double(q * q)) - (f[std::size_t(p)] + w2 * double(p * p))) /
          (2.0 * w2 * double(q - p));
      if (s <= z[std::size_t(k)] && k > 0)
        --k;
      else
        break;
    }
    if (s <= z[std::size_t(k)]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    ++k;
    v[std::size_t(k)] = q;
    z[std::size_t(k)] = s;
    z[std::size_t(k) + 1] = inf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.begin() + n, inf);
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (z[std::size_t(j) + 1] < double(q)) ++j;
    const auto p = v[std::size_t(j)];
    const double dq = w * double(q - p);
    d[std::size_t(q)] = dq * dq + f[std::size_t(p)];
  }
  std::copy(d.begin(), d.begin() + n, f.begin());
}

}  // namespace

std::vector<double> squared_edt(const Mask& sites) {
  const auto& g = sites.grid();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) dist[i] = sites[i] ? 0.0 : inf;

  const std::int64_t n[3] = {g.nx(), g.ny(), g.nz()};
  const std::int64_t stride[3] = {1, g.nx(), g.nx() * g.ny()};
  const auto longest = std::size_t(std::max({n[0], n[1], n[2]}));
  std::vector<double> line(longest), out(longest), z(longest + 1);
  std::vector<std::int64_t> v(longest);

  for (int axis = 0; axis < 3; ++axis) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (std::int64_t j = 0; j < n[a2]; ++j)
      for (std::int64_t i = 0; i < n[a1]; ++i) {
        const std::int64_t base = i * stride[a1] + j * stride[a2];
        line.resize(std::size_t(n[axis]));
        for (std::int64_t q = 0; q < n[axis]; ++q)
          line[std::size_t(q)] = dist[std::size_t(base + q * stride[axis])];
        edt_line(line, double(g.spacing[std::size_t(axis)]), out, v, z);
        for (std::int64_t q = 0; q < n[axis]; ++q)
          dist[std::size_t(base + q * stride[axis])] = line[std::size_t(q)];
      }
  }
  return dist;
}

std::vector<double> surface_distances_edt(const Mask& from, const Mask& to) {
  require_same_grid(from.grid(), to.grid(), "surface distances");
  const auto sa = surface_voxels(from);
  const auto sb = surface_voxels(to);
  if (sa.empty() || sb.empty()) throw UndefinedMetric("surface distance of empty mask");
  Mask sites(to.grid());
  for (const auto& b : sb) sites.at(b.x, b.y, b.z) = 1;
  const auto d2 = squared_edt(sites);
  std::vector<double> out;
  out.reserve(sa.size());
  for (const auto& a : sa) out.push_back(std::sqrt(d2[from.grid().offset(a)]));
  return out;
}

namespace {
template <typename Route>
double pooled_hd95(const Mask& a, const Mask& b, Route route) {
  auto d = route(a, b);
  auto back = route(b, a);
  d.insert(d.end(), back.begin(), back.end());
  return percentile(std::move(d), 95.0);
}
}  // namespace

double hd95_scan(const Mask& a, const Mask& b) {
  return pooled_hd95(a, b, surface_distances_scan);
}

double hd95_edt(const Mask& a, const Mask& b) {
  return pooled_hd95(a, b, surface_distances_edt);
}

double hd95(const Mask& a, const Mask& b) {
  require_same_grid(a.grid(), b.grid(), "hd95");
  if (a.empty_set() || b.empty_set()) throw UndefinedMetric("hd95 of empty mask");
  const auto n = surface_voxels(a).size() + surface_voxels(b).size();
  return n < kHd95ScanLimit ? hd95_scan(a, b) : hd95_edt(a, b);
}

EvalResult evaluate_case(const RegionMaskSet& pred, const RegionMaskSet& ref) {
  if (pred.regions() != ref.regions())
    throw RegionCountError("prediction and reference have different region counts");
  require_same_grid(pred.grid(), ref.grid(), "evaluate_case");
  EvalResult res;
  const double vv = ref.grid().voxel_volume();
  for (std::size_t k = 0; k < ref.regions(); ++k) {
    RegionEval r;
    r.dice = dice(pred[k], ref[k]);
    r.vol_pred_mm3 = double(pred[k].count()) * vv;
    r.vol_ref_mm3 = double(ref[k].count()) * vv;
    if (!pred[k].empty_set() && !ref[k].empty_set()) r.hd95_mm = hd95(pred[k], ref[k]);
    res.regions.push_back(r);
  }
  return res;
}

EvalResult evaluate_case(const ProbabilityMaps& pred, const RegionMaskSet& ref) {
  return evaluate_case(binarize(pred, 0.5), ref);
}

}  // namespace score

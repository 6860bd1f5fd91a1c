#include "lnl/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <json.hpp>

namespace lnl::phantom {

namespace {

// Portable bounded draw; std::uniform_int_distribution differs between standard libraries.
std::int64_t draw(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<std::int64_t>(rng() % span);
}

const std::vector<std::string>& lateral_chain() {
  static const std::vector<std::string> chain = {"IVb", "IVa", "III", "II", "Ib", "V", "VIIb", "VIII"};
  return chain;
}

const std::vector<std::string>& midline_chain() {
  static const std::vector<std::string> chain = {"VIb", "VIa", "Ia", "VIIa"};
  return chain;
}

struct Range {
  std::int64_t lo = 0, hi = 0;  // [lo, hi)
};

Range lateral_range(const PhantomConfig& c, const VoxelGrid& g, Laterality lat) {
  const Range low{c.i_begin, c.lateral_split - c.midline_half_width};
  const Range high{c.lateral_split + c.midline_half_width, c.i_end};
  if (lat == Laterality::midline) return {low.hi, high.lo};
  // Left is toward decreasing i when the i-axis points right.
  const bool i_points_right = g.axes[0] == AxisCode::R;
  const bool left = lat == Laterality::left;
  return (left == i_points_right) ? low : high;
}

VoxelGrid grid_of(const PhantomConfig& c) {
  VoxelGrid g;
  g.dims = c.dims;
  g.spacing_mm = c.spacing_mm;
  g.origin_mm = c.origin_mm;
  return g;
}

}  // namespace

void PhantomConfig::validate(const LevelSchema& schema) const {
  std::vector<std::string> errs;
  try {
    grid_of(*this).validate();
  } catch (const ValidationError& e) {
    errs.emplace_back(e.what());
  }
  if (dims[0] > std::numeric_limits<std::int16_t>::max() || dims[1] > std::numeric_limits<std::int16_t>::max() ||
      dims[2] > std::numeric_limits<std::int16_t>::max()) {
    errs.emplace_back("dims exceed 32767");
  }
  if (!(0 <= i_begin && i_begin < lateral_split - midline_half_width &&
        lateral_split + midline_half_width < i_end && i_end <= dims[0] && midline_half_width >= 1)) {
    errs.emplace_back("lateral split leaves an empty left, right or midline region");
  }
  if (!(0 <= j_begin && j_begin < j_end && j_end <= dims[1])) errs.emplace_back("j band outside grid");
  if (table && !(table_thickness >= 1 && table_thickness < dims[1])) errs.emplace_back("table thickness out of range");

  std::map<Laterality, std::vector<std::pair<std::int64_t, std::int64_t>>> used;
  for (const auto& s : slabs) {
    const auto* l = schema.find(s.id);
    if (l == nullptr) {
      errs.push_back("slab references unknown level " + std::to_string(s.id));
      continue;
    }
    if (s.height < 1) errs.push_back("slab for " + l->name + " has height < 1");
    if (s.k_begin < 0 || s.k_begin + s.height > dims[2]) errs.push_back("slab for " + l->name + " exceeds dims");
    for (const auto& [b, e] : used[l->laterality]) {
      if (s.k_begin < e && b < s.k_begin + s.height) {
        errs.push_back("slab for " + l->name + " overlaps another slab in the same region");
      }
    }
    used[l->laterality].emplace_back(s.k_begin, s.k_begin + s.height);
  }
  if (!errs.empty()) {
    std::string msg = "infeasible phantom config:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
}

std::string PhantomConfig::to_json() const {
  using nlohmann::json;
  json j;
  j["dims"] = dims;
  j["spacing_mm"] = spacing_mm;
  j["origin_mm"] = origin_mm;
  j["seed"] = seed;
  j["slabs"] = json::array();
  for (const auto& s : slabs) j["slabs"].push_back({{"id", s.id}, {"k_begin", s.k_begin}, {"height", s.height}});
  j["i_range"] = {i_begin, i_end};
  j["j_range"] = {j_begin, j_end};
  j["lateral_split"] = lateral_split;
  j["midline_half_width"] = midline_half_width;
  j["body"] = {{"center", {body_center_i, body_center_j}},
               {"radius", {body_radius_i, body_radius_j}},
               {"hu", body_hu}};
  j["air_hu"] = air_hu;
  j["table"] = {{"enabled", table}, {"thickness", table_thickness}, {"hu", table_hu}};
  return j.dump(2) + "\n";
}

PhantomConfig PhantomConfig::make_default(const LevelSchema& schema, std::uint64_t seed) {
  PhantomConfig c;
  c.seed = seed;
  const std::int64_t lateral_h = 8, midline_h = 16, k0 = 4;
  for (const char* side : {"_left", "_right"}) {
    std::int64_t k = k0;
    for (const auto& base : lateral_chain()) {
      if (const auto* l = schema.find(base + side)) {
        c.slabs.push_back({l->id, k, lateral_h});
        k += lateral_h;
      }
    }
  }
  std::int64_t k = k0;
  for (const auto& name : midline_chain()) {
    if (const auto* l = schema.find(name)) {
      c.slabs.push_back({l->id, k, midline_h});
      k += midline_h;
    }
  }
  return c;
}

PhantomConfig PhantomConfig::randomized(const LevelSchema& schema, std::uint64_t seed, std::int64_t min_dim,
                                        std::int64_t max_dim) {
  std::mt19937_64 rng(seed);
  static constexpr double kSpacings[] = {0.5, 0.7, 0.8, 1.0, 1.2, 1.5, 2.0, 2.5, 3.0};
  PhantomConfig c;
  c.seed = seed;
  c.dims = {draw(rng, std::max<std::int64_t>(min_dim, 10), max_dim), draw(rng, min_dim, max_dim),
            draw(rng, min_dim, max_dim)};
  for (int a = 0; a < 3; ++a) c.spacing_mm[a] = kSpacings[draw(rng, 0, std::size(kSpacings) - 1)];
  c.table = false;
  c.body_center_i = static_cast<double>(c.dims[0] - 1) / 2.0;
  c.body_center_j = static_cast<double>(c.dims[1] - 1) / 2.0;
  c.body_radius_i = static_cast<double>(c.dims[0]);
  c.body_radius_j = static_cast<double>(c.dims[1]);
  c.i_begin = draw(rng, 0, 2);
  c.i_end = c.dims[0] - draw(rng, 0, 2);
  c.lateral_split = c.dims[0] / 2;
  c.midline_half_width = draw(rng, 1, 2);
  c.j_begin = draw(rng, 0, c.dims[1] / 3);
  c.j_end = c.dims[1] - draw(rng, 0, c.dims[1] / 3);

  auto stack = [&](const std::vector<std::string>& chain, const std::string& suffix) {
    const auto first = draw(rng, 0, static_cast<std::int64_t>(chain.size()) - 1);
    const auto count = draw(rng, 1, static_cast<std::int64_t>(chain.size()) - first);
    std::int64_t k = draw(rng, 0, c.dims[2] / 4);
    for (std::int64_t n = first; n < first + count; ++n) {
      const auto* l = schema.find(chain[static_cast<std::size_t>(n)] + suffix);
      if (l == nullptr) continue;
      const auto h = draw(rng, 1, 6);
      if (k + h > c.dims[2]) break;
      c.slabs.push_back({l->id, k, h});
      k += h + (draw(rng, 0, 4) == 0 ? draw(rng, 1, 3) : 0);  // occasional gap
    }
  };
  stack(lateral_chain(), "_left");
  stack(lateral_chain(), "_right");
  stack(midline_chain(), "");
  return c;
}

std::int64_t region_area(const PhantomConfig& cfg, const LevelSchema& schema, LevelId id) {
  const auto* l = schema.find(id);
  if (l == nullptr) throw ValidationError("level " + std::to_string(id) + " not in schema");
  const auto r = lateral_range(cfg, grid_of(cfg), l->laterality);
  return (r.hi - r.lo) * (cfg.j_end - cfg.j_begin);
}

Phantom generate_phantom(const PhantomConfig& cfg, const LevelSchema& schema) {
  cfg.validate(schema);
  const VoxelGrid g = grid_of(cfg);
  Phantom p{ImageVolume(g, cfg.air_hu), LabelVolume(g, schema.schema_id)};
  const auto& d = g.dims;

  for (std::int64_t k = 0; k < d[2]; ++k) {
    for (std::int64_t j = 0; j < d[1]; ++j) {
      for (std::int64_t i = 0; i < d[0]; ++i) {
        const double u = (static_cast<double>(i) - cfg.body_center_i) / cfg.body_radius_i;
        const double v = (static_cast<double>(j) - cfg.body_center_j) / cfg.body_radius_j;
        if (u * u + v * v <= 1.0) {
          p.image.at(i, j, k) = cfg.body_hu;
        } else if (cfg.table && j < cfg.table_thickness) {
          p.image.at(i, j, k) = cfg.table_hu;
        }
      }
    }
  }

  for (const auto& s : cfg.slabs) {
    const auto* l = schema.find(s.id);
    const auto r = lateral_range(cfg, g, l->laterality);
    for (std::int64_t k = s.k_begin; k < s.k_begin + s.height; ++k)
      for (std::int64_t j = cfg.j_begin; j < cfg.j_end; ++j)
        for (std::int64_t i = r.lo; i < r.hi; ++i) p.labels.at(i, j, k) = s.id;
  }
  return p;
}

LabelVolume perturb_boundary_jitter(const LabelVolume& labels, const LevelSchema& schema, int max_shift_slices,
                                    std::uint64_t seed) {
  if (max_shift_slices < 1) throw DomainError("max_shift_slices must be >= 1");
  std::mt19937_64 rng(seed);
  LabelVolume out = labels;
  const auto& d = labels.grid.dims;
  const LevelId bg = schema.background_id;
  const auto m = static_cast<std::int64_t>(max_shift_slices);
  for (std::int64_t j = 0; j < d[1]; ++j) {
    for (std::int64_t i = 0; i < d[0]; ++i) {
      for (std::int64_t k = 1; k < d[2]; ++k) {
        const auto below = labels.at(i, j, k - 1);
        const auto above = labels.at(i, j, k);
        if (below == above || below == bg || above == bg) continue;
        const auto shift = draw(rng, -m, m);
        if (shift > 0) {
          for (std::int64_t t = 0; t < shift && k + t < d[2]; ++t) {
            if (labels.at(i, j, k + t) == above) out.at(i, j, k + t) = below;
          }
        } else if (shift < 0) {
          for (std::int64_t t = 1; t <= -shift && k - t >= 0; ++t) {
            if (labels.at(i, j, k - t) == below) out.at(i, j, k - t) = above;
          }
        }
      }
    }
  }
  return out;
}

MorphResult perturb_morphological(const LabelVolume& labels, LevelId level, int radius, MorphMode mode) {
  if (level == 0) throw DomainError("cannot perturb the background");
  if (std::find(labels.voxels.begin(), labels.voxels.end(), level) == labels.voxels.end()) {
    throw DomainError("level " + std::to_string(level) + " is not present");
  }
  if (radius < 0) throw DomainError("radius must be >= 0");
  MorphResult r{labels, false};
  const auto& g = labels.grid;
  static constexpr int kN[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int it = 0; it < radius; ++it) {
    const auto cur = r.labels.voxels;
    for (std::int64_t k = 0; k < g.dims[2]; ++k) {
      for (std::int64_t j = 0; j < g.dims[1]; ++j) {
        for (std::int64_t i = 0; i < g.dims[0]; ++i) {
          const auto idx = g.index(i, j, k);
          if (mode == MorphMode::erode) {
            if (cur[idx] != level) continue;
            for (const auto& n : kN) {
              const auto ii = i + n[0], jj = j + n[1], kk = k + n[2];
              if (!g.contains(ii, jj, kk) || cur[g.index(ii, jj, kk)] != level) {
                r.labels.voxels[idx] = 0;
                break;
              }
            }
          } else {
            if (cur[idx] != 0) continue;
            for (const auto& n : kN) {
              const auto ii = i + n[0], jj = j + n[1], kk = k + n[2];
              if (g.contains(ii, jj, kk) && cur[g.index(ii, jj, kk)] == level) {
                r.labels.voxels[idx] = level;
                break;
              }
            }
          }
        }
      }
    }
  }
  if (mode == MorphMode::erode) {
    r.annihilated = std::find(r.labels.voxels.begin(), r.labels.voxels.end(), level) == r.labels.voxels.end();
  }
  return r;
}

// ---------------------------------------------------------------------------------------
// Oracle. Written against the definitions only; shares nothing with the metrics module.

namespace {

struct Surfel {
  std::int64_t x2, y2, z2;  // doubled-lattice position of the face center
  double area;
};

bool inside(const LabelVolume& v, int id, std::int64_t i, std::int64_t j, std::int64_t k) {
  const auto& d = v.grid.dims;
  if (i < 0 || j < 0 || k < 0 || i >= d[0] || j >= d[1] || k >= d[2]) return false;
  const auto val = v.voxels[static_cast<std::size_t>(i + d[0] * (j + d[1] * k))];
  return id < 0 ? val != 0 : val == id;
}

// Walks every pair of neighbors (including the virtual ring outside the volume) along
// each axis and emits a surfel where membership differs.
std::vector<Surfel> surfels(const LabelVolume& v, int id, const Vec3& s) {
  std::vector<Surfel> out;
  const auto& d = v.grid.dims;
  for (std::int64_t k = -1; k < d[2]; ++k)
    for (std::int64_t j = -1; j < d[1]; ++j)
      for (std::int64_t i = -1; i < d[0]; ++i) {
        const bool here = inside(v, id, i, j, k);
        if (here != inside(v, id, i + 1, j, k) && j >= 0 && k >= 0)
          out.push_back({2 * i + 2, 2 * j + 1, 2 * k + 1, s[1] * s[2]});
        if (here != inside(v, id, i, j + 1, k) && i >= 0 && k >= 0)
          out.push_back({2 * i + 1, 2 * j + 2, 2 * k + 1, s[0] * s[2]});
        if (here != inside(v, id, i, j, k + 1) && i >= 0 && j >= 0)
          out.push_back({2 * i + 1, 2 * j + 1, 2 * k + 2, s[0] * s[1]});
      }
  return out;
}

std::vector<Index3> edge_voxels(const LabelVolume& v, int id) {
  std::vector<Index3> out;
  const auto& d = v.grid.dims;
  for (std::int64_t k = 0; k < d[2]; ++k)
    for (std::int64_t j = 0; j < d[1]; ++j)
      for (std::int64_t i = 0; i < d[0]; ++i) {
        if (!inside(v, id, i, j, k)) continue;
        int inner = 0;
        inner += inside(v, id, i - 1, j, k) + inside(v, id, i + 1, j, k);
        inner += inside(v, id, i, j - 1, k) + inside(v, id, i, j + 1, k);
        inner += inside(v, id, i, j, k - 1) + inside(v, id, i, j, k + 1);
        if (inner < 6) out.push_back({i, j, k});
      }
  return out;
}

// Nearest squared distance from each surfel of `from` to any surfel of `to`.
std::vector<double> all_pairs(const std::vector<Surfel>& from, const std::vector<Surfel>& to, const Vec3& half) {
  std::vector<double> best(from.size(), std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < from.size(); ++a) {
    for (const auto& b : to) {
      const double dx = static_cast<double>(from[a].x2 - b.x2) * half[0];
      const double dy = static_cast<double>(from[a].y2 - b.y2) * half[1];
      const double dz = static_cast<double>(from[a].z2 - b.z2) * half[2];
      const double d2 = (dx * dx + dy * dy) + dz * dz;
      if (d2 < best[a]) best[a] = d2;
    }
  }
  return best;
}

double directed_max(const std::vector<Index3>& from, const std::vector<Index3>& to, const Vec3& s) {
  double worst = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) {
      const double dx = static_cast<double>(p[0] - q[0]) * s[0];
      const double dy = static_cast<double>(p[1] - q[1]) * s[1];
      const double dz = static_cast<double>(p[2] - q[2]) * s[2];
      best = std::min(best, (dx * dx + dy * dy) + dz * dz);
    }
    worst = std::max(worst, best);
  }
  return worst;
}

std::vector<LevelMetrics> oracle_entry(const LabelVolume& pred, const LabelVolume& ref, const VoxelGrid& grid,
                                       int id, const std::vector<double>& tols) {
  std::size_t np = 0, nr = 0, both = 0;
  for (std::size_t n = 0; n < pred.voxels.size(); ++n) {
    const bool a = id < 0 ? pred.voxels[n] != 0 : pred.voxels[n] == id;
    const bool b = id < 0 ? ref.voxels[n] != 0 : ref.voxels[n] == id;
    np += a;
    nr += b;
    both += a && b;
  }
  LevelMetrics base;
  base.level = id < 0 ? 0 : id;
  base.vol_dice = (np + nr == 0) ? 1.0 : 2.0 * static_cast<double>(both) / static_cast<double>(np + nr);

  const Vec3& s = grid.spacing_mm;
  const Vec3 half{s[0] / 2, s[1] / 2, s[2] / 2};
  const auto sp = surfels(pred, id, s);
  const auto sr = surfels(ref, id, s);
  std::vector<double> dp, dr;
  if (!sp.empty() && !sr.empty()) {
    dp = all_pairs(sp, sr, half);
    dr = all_pairs(sr, sp, half);
  }
  if (np > 0 && nr > 0) {
    const auto ep = edge_voxels(pred, id);
    const auto er = edge_voxels(ref, id);
    base.hausdorff_max_mm = std::sqrt(std::max(directed_max(ep, er, s), directed_max(er, ep, s)));
  }

  std::vector<LevelMetrics> out;
  for (double tol : tols) {
    LevelMetrics m = base;
    if (sp.empty() && sr.empty()) {
      m.surf_dice = 1.0;
    } else if (sp.empty() || sr.empty()) {
      m.surf_dice = 0.0;
    } else {
      const double limit = tol * tol * (1.0 + kToleranceRelEps);
      double hit = 0.0, total = 0.0;
      for (std::size_t a = 0; a < sp.size(); ++a) {
        total += sp[a].area;
        if (dp[a] <= limit) hit += sp[a].area;
      }
      for (std::size_t b = 0; b < sr.size(); ++b) {
        total += sr[b].area;
        if (dr[b] <= limit) hit += sr[b].area;
      }
      m.surf_dice = hit / total;
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace

std::vector<MetricReport> oracle_metrics(const LabelVolume& pred, const LabelVolume& ref, const VoxelGrid& grid,
                                         const std::vector<double>& tolerances_mm) {
  for (auto n : grid.dims) {
    if (n > kOracleMaxDim) throw DomainError("oracle size guard: dimensions above 64 are not supported");
  }
  if (pred.grid.dims != grid.dims || ref.grid.dims != grid.dims) {
    throw GeometryError("oracle inputs must share the given grid");
  }
  std::array<bool, 256> present{};
  for (auto v : pred.voxels) present[v] = true;
  for (auto v : ref.voxels) present[v] = true;

  std::vector<MetricReport> reports(tolerances_mm.size());
  for (std::size_t t = 0; t < tolerances_mm.size(); ++t) reports[t].tolerance_mm = tolerances_mm[t];
  for (int id = 1; id < 256; ++id) {
    if (!present[id]) continue;
    const auto e = oracle_entry(pred, ref, grid, id, tolerances_mm);
    for (std::size_t t = 0; t < e.size(); ++t) reports[t].levels.push_back(e[t]);
  }
  const auto u = oracle_entry(pred, ref, grid, -1, tolerances_mm);
  for (std::size_t t = 0; t < u.size(); ++t) reports[t].union_metrics = u[t];
  return reports;
}

MetricReport oracle_metrics(const LabelVolume& pred, const LabelVolume& ref, const VoxelGrid& grid, double tol_mm) {
  return oracle_metrics(pred, ref, grid, std::vector<double>{tol_mm}).front();
}

}  // namespace lnl::phantom

#include "lnl/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "lnl/distance_transform.hpp"
#include "lnl/preprocess.hpp"

namespace lnl {

namespace {

void require_compatible(const VoxelGrid& a, const VoxelGrid& b) {
  const auto check = check_geometry_compatible(a, b);
  if (check) return;
  std::string fields;
  for (const auto& f : check.mismatches) fields += " " + f;
  throw GeometryError("masks are not geometry-compatible:" + fields);
}

// Face centers on the doubled lattice: voxel (i,j,k) sits at (2i+1, 2j+1, 2k+1).
struct Faces {
  std::vector<Index3> at;
  std::vector<double> area;
  double total = 0.0;
};

Faces extract_faces(const MaskVolume& m) {
  Faces out;
  const auto& d = m.grid.dims;
  const auto& s = m.grid.spacing_mm;
  const double area[3] = {s[1] * s[2], s[0] * s[2], s[0] * s[1]};
  auto fg = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
    return m.grid.contains(i, j, k) && m.at(i, j, k) != 0;
  };
  for (std::int64_t k = 0; k < d[2]; ++k) {
    for (std::int64_t j = 0; j < d[1]; ++j) {
      for (std::int64_t i = 0; i < d[0]; ++i) {
        if (!m.at(i, j, k)) continue;
        const std::int64_t c[3] = {2 * i + 1, 2 * j + 1, 2 * k + 1};
        const std::int64_t p[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          for (int dir : {-1, +1}) {
            std::int64_t q[3] = {p[0], p[1], p[2]};
            q[a] += dir;
            if (fg(q[0], q[1], q[2])) continue;
            Index3 f{c[0], c[1], c[2]};
            f[a] += dir;
            out.at.push_back(f);
            out.area.push_back(area[a]);
            out.total += area[a];
          }
        }
      }
    }
  }
  return out;
}

std::vector<Index3> boundary_voxels(const MaskVolume& m) {
  std::vector<Index3> out;
  const auto& d = m.grid.dims;
  auto fg = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
    return m.grid.contains(i, j, k) && m.at(i, j, k) != 0;
  };
  for (std::int64_t k = 0; k < d[2]; ++k) {
    for (std::int64_t j = 0; j < d[1]; ++j) {
      for (std::int64_t i = 0; i < d[0]; ++i) {
        if (!m.at(i, j, k)) continue;
        if (!fg(i - 1, j, k) || !fg(i + 1, j, k) || !fg(i, j - 1, k) || !fg(i, j + 1, k) ||
            !fg(i, j, k - 1) || !fg(i, j, k + 1)) {
          out.push_back({i, j, k});
        }
      }
    }
  }
  return out;
}

struct Box {
  Index3 lo{std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max(),
            std::numeric_limits<std::int64_t>::max()};
  Index3 hi{std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::min(),
            std::numeric_limits<std::int64_t>::min()};

  void add(const Index3& p) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  Index3 dims() const { return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}; }
  std::size_t index(const Index3& p) const {
    const auto d = dims();
    return static_cast<std::size_t>((p[0] - lo[0]) + d[0] * ((p[1] - lo[1]) + d[1] * (p[2] - lo[2])));
  }
};

// Squared distance from each query point to the nearest seed point, via an EDT over the
// bounding box of both point sets.
std::vector<double> nearest_sq(const std::vector<Index3>& queries, const std::vector<Index3>& seeds,
                               const Vec3& spacing) {
  Box box;
  for (const auto& p : queries) box.add(p);
  for (const auto& p : seeds) box.add(p);
  const auto dims = box.dims();
  std::vector<std::uint8_t> grid(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]), 0);
  for (const auto& p : seeds) grid[box.index(p)] = 1;
  const auto d = squared_edt(grid, dims, spacing);
  std::vector<double> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = d[box.index(queries[i])];
  return out;
}

std::size_t count_nonzero(const MaskVolume& m) {
  return static_cast<std::size_t>(std::count_if(m.voxels.begin(), m.voxels.end(), [](auto v) { return v != 0; }));
}

}  // namespace

double volumetric_dice(const MaskVolume& a, const MaskVolume& b) {
  require_compatible(a.grid, b.grid);
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.voxels[i] != 0, y = b.voxels[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double surface_dice(const MaskVolume& a, const MaskVolume& b, double tol_mm) {
  require_compatible(a.grid, b.grid);
  if (!(tol_mm >= 0.0)) throw DomainError("surface Dice tolerance must be >= 0");
  const Faces fa = extract_faces(a);
  const Faces fb = extract_faces(b);
  if (fa.at.empty() && fb.at.empty()) return 1.0;
  if (fa.at.empty() || fb.at.empty()) return 0.0;

  const Vec3 half{a.grid.spacing_mm[0] / 2, a.grid.spacing_mm[1] / 2, a.grid.spacing_mm[2] / 2};
  const double limit = tol_mm * tol_mm * (1.0 + kToleranceRelEps);
  double overlap = 0.0;
  const auto da = nearest_sq(fa.at, fb.at, half);
  for (std::size_t i = 0; i < da.size(); ++i) {
    if (da[i] <= limit) overlap += fa.area[i];
  }
  const auto db = nearest_sq(fb.at, fa.at, half);
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (db[i] <= limit) overlap += fb.area[i];
  }
  return overlap / (fa.total + fb.total);
}

double hausdorff_max(const MaskVolume& a, const MaskVolume& b) {
  require_compatible(a.grid, b.grid);
  const auto ba = boundary_voxels(a);
  const auto bb = boundary_voxels(b);
  if (ba.empty() || bb.empty()) throw DegenerateInputError("Hausdorff distance is undefined for an empty mask");
  double worst = 0.0;
  for (double d : nearest_sq(ba, bb, a.grid.spacing_mm)) worst = std::max(worst, d);
  for (double d : nearest_sq(bb, ba, a.grid.spacing_mm)) worst = std::max(worst, d);
  return std::sqrt(worst);
}

double default_tolerance(const VoxelGrid& grid) noexcept {
  return std::max({grid.spacing_mm[0], grid.spacing_mm[1], grid.spacing_mm[2]});
}

const LevelMetrics* MetricReport::find(int level) const noexcept {
  if (level == 0) return &union_metrics;
  for (const auto& l : levels) {
    if (l.level == level) return &l;
  }
  return nullptr;
}

namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return {};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

std::string level_name(const LevelSchema& schema, int level) {
  if (level == 0) return "union";
  const auto* l = schema.find(static_cast<LevelId>(level));
  return l ? l->name : std::to_string(level);
}

LevelMetrics compute(const MaskVolume& p, const MaskVolume& r, int level, double tol) {
  LevelMetrics m;
  m.level = level;
  m.vol_dice = volumetric_dice(p, r);
  m.surf_dice = surface_dice(p, r, tol);
  if (count_nonzero(p) > 0 && count_nonzero(r) > 0) m.hausdorff_max_mm = hausdorff_max(p, r);
  return m;
}

}  // namespace

std::string MetricReport::to_json(const LevelSchema& schema) const {
  using nlohmann::json;
  auto entry = [&](const LevelMetrics& m) {
    json j;
    j["level"] = level_name(schema, m.level);
    j["level_id"] = m.level;
    j["vol_dice"] = m.vol_dice ? json(*m.vol_dice) : json(nullptr);
    j["surf_dice"] = m.surf_dice ? json(*m.surf_dice) : json(nullptr);
    j["hd_max_mm"] = m.hausdorff_max_mm ? json(*m.hausdorff_max_mm) : json(nullptr);
    return j;
  };
  json root;
  root["case"] = case_id;
  root["tolerance_mm"] = tolerance_mm;
  root["levels"] = json::array();
  for (const auto& l : levels) root["levels"].push_back(entry(l));
  root["union"] = entry(union_metrics);
  return root.dump(2) + "\n";
}

std::string MetricReport::csv_header(bool with_set) {
  return with_set ? "case,set,level,vol_dice,surf_dice,hd_max_mm" : "case,level,vol_dice,surf_dice,hd_max_mm";
}

std::vector<std::string> MetricReport::csv_rows(const LevelSchema& schema, const std::string& set_name) const {
  std::vector<std::string> rows;
  auto row = [&](const LevelMetrics& m) {
    std::string r = case_id + ",";
    if (!set_name.empty()) r += set_name + ",";
    r += level_name(schema, m.level) + "," + fmt(m.vol_dice) + "," + fmt(m.surf_dice) + "," +
         fmt(m.hausdorff_max_mm);
    rows.push_back(std::move(r));
  };
  for (const auto& l : levels) row(l);
  row(union_metrics);
  return rows;
}

MetricReport evaluate_case(const LabelVolume& pred, const LabelVolume& ref, const LevelSchema& schema,
                           std::optional<double> tol_mm, std::string case_id) {
  require_compatible(pred.grid, ref.grid);
  if (!pred.schema_id.empty() && !ref.schema_id.empty() && pred.schema_id != ref.schema_id) {
    throw ValidationError("prediction uses schema '" + pred.schema_id + "' but reference uses '" +
                          ref.schema_id + "'");
  }
  MetricReport rep;
  rep.case_id = std::move(case_id);
  rep.tolerance_mm = tol_mm.value_or(default_tolerance(ref.grid));

  // Per-label bounding boxes in one sweep, so each level is evaluated on a small crop.
  struct Bounds {
    Index3 lo{INT64_MAX, INT64_MAX, INT64_MAX};
    Index3 hi{-1, -1, -1};
  };
  std::array<Bounds, 256> bounds;
  const auto& d = ref.grid.dims;
  for (std::int64_t k = 0; k < d[2]; ++k) {
    for (std::int64_t j = 0; j < d[1]; ++j) {
      for (std::int64_t i = 0; i < d[0]; ++i) {
        const std::size_t idx = ref.grid.index(i, j, k);
        for (auto v : {pred.voxels[idx], ref.voxels[idx]}) {
          if (v == schema.background_id) continue;
          auto& b = bounds[v];
          b.lo = {std::min(b.lo[0], i), std::min(b.lo[1], j), std::min(b.lo[2], k)};
          b.hi = {std::max(b.hi[0], i), std::max(b.hi[1], j), std::max(b.hi[2], k)};
        }
      }
    }
  }
  auto crop_for = [&](const Bounds& b) {
    CropBox box;
    for (int a = 0; a < 3; ++a) {
      box.min[a] = std::max<std::int64_t>(0, b.lo[a] - 1);
      box.max[a] = std::min<std::int64_t>(d[a], b.hi[a] + 2);
    }
    return box;
  };

  Bounds all;
  for (const auto& lvl : schema.levels) {
    const auto& b = bounds[lvl.id];
    if (b.hi[0] < 0) continue;  // empty in both
    for (int a = 0; a < 3; ++a) {
      all.lo[a] = std::min(all.lo[a], b.lo[a]);
      all.hi[a] = std::max(all.hi[a], b.hi[a]);
    }
    const auto box = crop_for(b);
    const auto p = label_mask(crop_to_box(pred, box), lvl.id);
    const auto r = label_mask(crop_to_box(ref, box), lvl.id);
    rep.levels.push_back(compute(p, r, lvl.id, rep.tolerance_mm));
  }
  std::sort(rep.levels.begin(), rep.levels.end(), [](const auto& x, const auto& y) { return x.level < y.level; });

  // Union of every non-background voxel, including ids outside the schema.
  for (int v = 0; v < 256; ++v) {
    if (v == schema.background_id || bounds[v].hi[0] < 0) continue;
    for (int a = 0; a < 3; ++a) {
      all.lo[a] = std::min(all.lo[a], bounds[v].lo[a]);
      all.hi[a] = std::max(all.hi[a], bounds[v].hi[a]);
    }
  }
  if (all.hi[0] < 0) {
    rep.union_metrics = {0, 1.0, 1.0, std::nullopt};
  } else {
    const auto box = crop_for(all);
    auto p = crop_to_box(pred, box);
    auto r = crop_to_box(ref, box);
    MaskVolume pm(p.grid, std::uint8_t{0}), rm(r.grid, std::uint8_t{0});
    for (std::size_t i = 0; i < p.size(); ++i) {
      pm.voxels[i] = p.voxels[i] != schema.background_id;
      rm.voxels[i] = r.voxels[i] != schema.background_id;
    }
    rep.union_metrics = compute(pm, rm, 0, rep.tolerance_mm);
  }
  return rep;
}

}  // namespace lnl

#include "lnl/postprocess.hpp"

#include <algorithm>
#include <array>
#include <cstring>

#include <json.hpp>

namespace lnl {

void SliceAdjustConfig::validate() const {
  if (!(drop_fraction > 0.0 && drop_fraction <= 1.0)) {
    throw ValidationError("drop_fraction must be in (0, 1]");
  }
}

std::size_t AdjustmentReport::total_changed() const noexcept {
  std::size_t n = 0;
  for (const auto& e : exclusions) n += e.overwritten;
  for (const auto& b : boundary) n += b.cleared;
  return n;
}

std::string AdjustmentReport::to_json(const LevelSchema& schema, std::optional<double> elapsed_seconds) const {
  using nlohmann::json;
  auto name = [&](LevelId id) {
    const auto* l = schema.find(id);
    return l ? l->name : std::to_string(id);
  };
  json root;
  root["schema_id"] = schema.schema_id;
  root["exclusions"] = json::array();
  for (const auto& e : exclusions) {
    json members = json::array();
    if (e.group < schema.exclusion_groups.size()) {
      for (auto id : schema.exclusion_groups[e.group]) members.push_back(name(id));
    }
    root["exclusions"].push_back({{"slice", e.slice},
                                  {"group", e.group},
                                  {"group_members", members},
                                  {"winner", name(e.winner)},
                                  {"winner_id", e.winner},
                                  {"overwritten", e.overwritten}});
  }
  root["boundary"] = json::array();
  for (const auto& b : boundary) {
    root["boundary"].push_back({{"slice", b.slice},
                                {"rule", b.rule == BoundaryRule::min_voxels ? "min-voxels" : "drop"},
                                {"direction", b.direction == ScanDirection::ascending ? "ascending" : "descending"},
                                {"cleared", b.cleared}});
  }
  root["total_changed"] = total_changed();
  if (elapsed_seconds) root["elapsed_seconds"] = *elapsed_seconds;
  return root.dump(2) + "\n";
}

namespace {

using Histogram = std::array<std::size_t, 256>;

void slice_histogram(const std::uint8_t* p, std::size_t n, Histogram& h) {
  // Four interleaved tables avoid serialising on repeated increments of one counter.
  std::array<std::array<std::uint32_t, 256>, 4> part{};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    ++part[0][p[i]];
    ++part[1][p[i + 1]];
    ++part[2][p[i + 2]];
    ++part[3][p[i + 3]];
  }
  for (; i < n; ++i) ++part[0][p[i]];
  for (int v = 0; v < 256; ++v) h[v] = std::size_t{part[0][v]} + part[1][v] + part[2][v] + part[3][v];
}

void check_schema(const LabelVolume& labels, const LevelSchema& schema) {
  schema.validate();
  if (!labels.schema_id.empty() && labels.schema_id != schema.schema_id) {
    throw ValidationError("label volume uses schema '" + labels.schema_id + "', not '" + schema.schema_id + "'");
  }
}

// Resolves one slice in place. Returns true when any voxel changed.
bool resolve_slice(std::uint8_t* slice, std::size_t n, std::int64_t k, const LevelSchema& schema,
                   Histogram& h, std::vector<ExclusionRecord>& records) {
  const auto& groups = schema.exclusion_groups;
  bool conflict = false;
  for (const auto& g : groups) {
    int present = 0;
    for (auto m : g) present += h[m] > 0;
    if (present >= 2) {
      conflict = true;
      break;
    }
  }
  if (!conflict) return false;

  const Histogram original = h;
  std::array<std::uint8_t, 256> map{};
  for (int v = 0; v < 256; ++v) map[v] = static_cast<std::uint8_t>(v);
  std::array<int, 256> first_record;
  first_record.fill(-1);

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    int present = 0;
    LevelId winner = 0;
    std::size_t best = 0;
    for (auto m : g) {
      if (h[m] == 0) continue;
      ++present;
      if (h[m] > best || (h[m] == best && m < winner)) {
        best = h[m];
        winner = m;
      }
    }
    if (present < 2) continue;
    const int rec = static_cast<int>(records.size());
    records.push_back({k, gi, winner, 0});
    for (auto m : g) {
      if (m == winner || h[m] == 0) continue;
      h[winner] += h[m];
      h[m] = 0;
      for (int v = 0; v < 256; ++v) {
        if (map[v] == m) {
          map[v] = winner;
          if (first_record[v] < 0) first_record[v] = rec;
        }
      }
    }
  }

  bool changed = false;
  for (int v = 0; v < 256; ++v) {
    if (map[v] != v && original[v] > 0) {
      changed = true;
      records[static_cast<std::size_t>(first_record[v])].overwritten += original[v];
    }
  }
  if (changed) {
    for (std::size_t i = 0; i < n; ++i) slice[i] = map[slice[i]];
  }
  return changed;
}

}  // namespace

AdjustResult slice_plane_adjust(const LabelVolume& labels, const LevelSchema& schema, const SliceAdjustConfig& cfg) {
  check_schema(labels, schema);
  cfg.validate();

  AdjustResult out{labels, {}};
  const auto nz = labels.grid.dims[2];
  const std::size_t n = labels.grid.slice_size();
  const LevelId bg = schema.background_id;
  std::vector<std::size_t> count(static_cast<std::size_t>(nz), 0);

  // Phase A.
  Histogram h;
  for (std::int64_t k = 0; k < nz; ++k) {
    std::uint8_t* slice = out.labels.voxels.data() + static_cast<std::size_t>(k) * n;
    slice_histogram(slice, n, h);
    resolve_slice(slice, n, k, schema, h, out.report.exclusions);
    count[static_cast<std::size_t>(k)] = n - h[bg];
  }

  // Phase B.
  auto clear = [&](std::int64_t k, BoundaryRule rule, ScanDirection dir) {
    std::uint8_t* slice = out.labels.voxels.data() + static_cast<std::size_t>(k) * n;
    std::memset(slice, bg, n);
    out.report.boundary.push_back({k, rule, dir, count[static_cast<std::size_t>(k)]});
    count[static_cast<std::size_t>(k)] = 0;
  };
  auto at = [&](std::int64_t k) -> std::size_t {
    return (k < 0 || k >= nz) ? 0 : count[static_cast<std::size_t>(k)];
  };
  // `step` is +1 for the ascending scan, -1 for descending.
  auto drops = [&](std::int64_t k, int step) {
    const std::int64_t prev = k - step;
    if (prev < 0 || prev >= nz) return false;
    const double c = static_cast<double>(at(k));
    const double p = static_cast<double>(at(prev));
    return c > 0 && p > 0 && (p - c) >= cfg.drop_fraction * p && at(k + step) == 0;
  };
  for (int step : {+1, -1}) {
    const auto dir = step > 0 ? ScanDirection::ascending : ScanDirection::descending;
    for (std::int64_t k = step > 0 ? 0 : nz - 1; k >= 0 && k < nz; k += step) {
      if (at(k) == 0) continue;
      if (at(k) <= cfg.min_foreground_voxels) {
        clear(k, BoundaryRule::min_voxels, dir);
      } else if (drops(k, step)) {
        clear(k, BoundaryRule::drop, dir);
      } else {
        continue;
      }
      for (std::int64_t m = k - step; m >= 0 && m < nz && drops(m, step); m -= step) {
        clear(m, BoundaryRule::drop, dir);
      }
    }
  }
  return out;
}

std::vector<SliceViolation> slice_consistency_violations(const LabelVolume& labels, const LevelSchema& schema) {
  std::vector<SliceViolation> out;
  const std::size_t n = labels.grid.slice_size();
  Histogram h;
  for (std::int64_t k = 0; k < labels.grid.dims[2]; ++k) {
    slice_histogram(labels.voxels.data() + static_cast<std::size_t>(k) * n, n, h);
    for (std::size_t g = 0; g < schema.exclusion_groups.size(); ++g) {
      std::vector<LevelId> present;
      for (auto m : schema.exclusion_groups[g]) {
        if (h[m] > 0) present.push_back(m);
      }
      if (present.size() >= 2) out.push_back({k, g, std::move(present)});
    }
  }
  return out;
}

LabelVolume largest_component_per_label(const LabelVolume& labels, const LevelSchema& schema,
                                        const std::optional<std::vector<LevelId>>& which,
                                        Connectivity connectivity) {
  check_schema(labels, schema);
  std::array<bool, 256> selected{};
  if (which) {
    for (auto id : *which) {
      if (!schema.contains(id)) throw ValidationError("level id " + std::to_string(id) + " not in schema");
      selected[id] = true;
    }
  } else {
    for (const auto& l : schema.levels) selected[l.id] = true;
  }

  Volume<std::uint8_t> sel(labels.grid, std::uint8_t{0});
  bool any = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = labels.voxels[i];
    if (selected[v]) {
      sel.voxels[i] = v;
      any = true;
    }
  }
  LabelVolume out = labels;
  if (!any) return out;

  const auto cc = label_components(sel, connectivity);
  // Component ids follow first-voxel order, so a strict > keeps the earliest on ties.
  std::array<std::uint32_t, 256> keep{};
  for (std::uint32_t c = 1; c < cc.size.size(); ++c) {
    const auto v = cc.value[c];
    if (keep[v] == 0 || cc.size[c] > cc.size[keep[v]]) keep[v] = c;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto c = cc.component[i];
    if (c != 0 && keep[cc.value[c]] != c) out.voxels[i] = schema.background_id;
  }
  return out;
}

}  // namespace lnl

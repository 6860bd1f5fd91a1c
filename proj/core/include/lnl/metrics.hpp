#pragma once

// Geometric agreement between two segmentations.
//
// Surfaces are voxel faces separating a foreground voxel from a background voxel (the
// outside of the volume counts as background), each weighted by its area in mm^2.
// Surface distances are Euclidean distances in mm between face centers; a face is
// within tolerance when its squared distance is <= tol^2 * (1 + 1e-12) (absorbs
// rounding on exact grid distances). Hausdorff distances use the centers of boundary
// voxels, i.e. foreground voxels with at least one background face neighbor.

#include <optional>
#include <string>
#include <vector>

#include "lnl/schema.hpp"
#include "lnl/volume.hpp"

namespace lnl {

inline constexpr double kToleranceRelEps = 1e-12;

/// 2|A & B| / (|A| + |B|); 1.0 when both masks are empty.
double volumetric_dice(const MaskVolume& a, const MaskVolume& b);

/// Area-weighted surface Dice at `tol_mm`; 1.0 when both masks are empty.
double surface_dice(const MaskVolume& a, const MaskVolume& b, double tol_mm);

/// Symmetric maximum boundary-to-boundary distance in mm. Throws DegenerateInputError
/// if either mask is empty.
double hausdorff_max(const MaskVolume& a, const MaskVolume& b);

/// "One voxel" tolerance: the largest spacing component.
double default_tolerance(const VoxelGrid& grid) noexcept;

struct LevelMetrics {
  int level = 0;  // level id; 0 denotes the all-levels union
  std::optional<double> vol_dice;
  std::optional<double> surf_dice;
  std::optional<double> hausdorff_max_mm;

  friend bool operator==(const LevelMetrics&, const LevelMetrics&) = default;
};

struct MetricReport {
  std::string case_id;
  double tolerance_mm = 0.0;
  std::vector<LevelMetrics> levels;  // ascending level id; levels empty in both volumes are omitted
  LevelMetrics union_metrics;

  const LevelMetrics* find(int level) const noexcept;
  std::string to_json(const LevelSchema& schema) const;
  /// Rows "case,level,vol_dice,surf_dice,hd_max_mm" (no header); absent values are empty cells.
  /// A non-empty `set_name` is inserted as a second column.
  std::vector<std::string> csv_rows(const LevelSchema& schema, const std::string& set_name = {}) const;
  static std::string csv_header(bool with_set);
};

/// Per-level and union metrics of `pred` against `ref`. `tol_mm` defaults to
/// default_tolerance(ref.grid).
MetricReport evaluate_case(const LabelVolume& pred, const LabelVolume& ref, const LevelSchema& schema,
                           std::optional<double> tol_mm = std::nullopt, std::string case_id = {});

}  // namespace lnl

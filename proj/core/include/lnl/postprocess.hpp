#pragma once

// CT slice-plane adjustment of level label volumes.
//
// Phase A (exclusion resolution) walks every axial slice. For each exclusion group, in
// schema order, if two or more members occur on the slice, all of them are rewritten to
// the member with the most voxels on that slice (lowest id on ties). Groups sharing a
// level see the counts left by earlier groups.
//
// Phase B (background boundary) then clears whole slices to background: a slice with
// at most `min_foreground_voxels` non-background voxels, or a slice whose count fell by
// at least `drop_fraction` relative to the preceding slice in scan direction while the
// following slice is empty. Slices are scanned inferior-to-superior, then
// superior-to-inferior. When a slice is cleared the scan steps back one slice, because
// that slice now borders an empty one; Phase B therefore ends at a fixed point and the
// whole adjustment is idempotent.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lnl/morphology.hpp"
#include "lnl/schema.hpp"
#include "lnl/volume.hpp"

namespace lnl {

struct SliceAdjustConfig {
  std::size_t min_foreground_voxels = 10;
  double drop_fraction = 0.80;

  void validate() const;
};

enum class BoundaryRule { min_voxels, drop };
enum class ScanDirection { ascending, descending };

struct ExclusionRecord {
  std::int64_t slice = 0;
  std::size_t group = 0;  // index into LevelSchema::exclusion_groups
  LevelId winner = 0;
  std::size_t overwritten = 0;

  friend bool operator==(const ExclusionRecord&, const ExclusionRecord&) = default;
};

struct BoundaryRecord {
  std::int64_t slice = 0;
  BoundaryRule rule = BoundaryRule::min_voxels;
  ScanDirection direction = ScanDirection::ascending;
  std::size_t cleared = 0;

  friend bool operator==(const BoundaryRecord&, const BoundaryRecord&) = default;
};

struct AdjustmentReport {
  std::vector<ExclusionRecord> exclusions;
  std::vector<BoundaryRecord> boundary;

  bool empty() const noexcept { return exclusions.empty() && boundary.empty(); }
  /// Sum of overwritten and cleared voxels; equals the number of voxels that differ
  /// between input and output.
  std::size_t total_changed() const noexcept;
  std::string to_json(const LevelSchema& schema, std::optional<double> elapsed_seconds = std::nullopt) const;

  friend bool operator==(const AdjustmentReport&, const AdjustmentReport&) = default;
};

struct AdjustResult {
  LabelVolume labels;
  AdjustmentReport report;
};

AdjustResult slice_plane_adjust(const LabelVolume& labels, const LevelSchema& schema,
                                const SliceAdjustConfig& cfg = {});

struct SliceViolation {
  std::int64_t slice = 0;
  std::size_t group = 0;
  std::vector<LevelId> present;  // group members found on the slice

  friend bool operator==(const SliceViolation&, const SliceViolation&) = default;
};

/// Every (slice, exclusion group) pair with two or more members present.
std::vector<SliceViolation> slice_consistency_violations(const LabelVolume& labels, const LevelSchema& schema);

/// For each selected level (every schema level when `which` is nullopt) keep only its
/// largest connected component; the rest becomes background. Equal-size ties keep the
/// component reached first in k-major scan order.
LabelVolume largest_component_per_label(const LabelVolume& labels, const LevelSchema& schema,
                                        const std::optional<std::vector<LevelId>>& which = std::nullopt,
                                        Connectivity connectivity = Connectivity::full26);

}  // namespace lnl

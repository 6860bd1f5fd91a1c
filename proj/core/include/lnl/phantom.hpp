#pragma once

// Synthetic neck phantoms, controlled perturbations and brute-force metric oracles.
//
// A phantom is a soft-tissue elliptic cylinder (40 HU) in air (-1000 HU), optionally
// with a detached table slab on the posterior side. Levels are axis-aligned boxes:
// craniocaudal slabs [k_begin, k_begin + height) over a fixed anterior-posterior band,
// laterally confined to the left region, the right region, or a central midline band.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lnl/metrics.hpp"
#include "lnl/schema.hpp"
#include "lnl/volume.hpp"

namespace lnl::phantom {

struct LevelSlab {
  LevelId id = 0;
  std::int64_t k_begin = 0;
  std::int64_t height = 1;
};

struct PhantomConfig {
  Index3 dims{48, 40, 72};
  Vec3 spacing_mm{1.0, 1.0, 3.0};
  Vec3 origin_mm{0.0, 0.0, 0.0};
  std::uint64_t seed = 0;  // provenance; randomized() derives geometry from it

  std::vector<LevelSlab> slabs;

  // In-plane label region: i in [i_begin, i_end), j in [j_begin, j_end). Midline levels
  // occupy i in [split - half_width, split + half_width); lateral levels the rest of
  // their side. With R/A/S axes the left side is i < split.
  std::int64_t i_begin = 8, i_end = 40;
  std::int64_t j_begin = 12, j_end = 28;
  std::int64_t lateral_split = 24;
  std::int64_t midline_half_width = 4;

  // Body ellipse in voxel units.
  double body_center_i = 23.5, body_center_j = 20.0;
  double body_radius_i = 21.0, body_radius_j = 16.0;
  float body_hu = 40.0f;
  float air_hu = -1000.0f;

  bool table = true;
  std::int64_t table_thickness = 2;  // rows j in [0, table_thickness)
  float table_hu = 150.0f;

  /// Throws ValidationError if slabs leave the grid, overlap in the same region, or the
  /// label region does not fit.
  void validate(const LevelSchema& schema) const;
  std::string to_json() const;

  /// Default geometry: every schema level instantiated; lateral levels stacked 8 slices
  /// each per side (IVb, IVa, III, II, Ib, V, VIIb, VIII from inferior to superior),
  /// midline levels 16 slices each (VIb, VIa, Ia, VIIa).
  static PhantomConfig make_default(const LevelSchema& schema, std::uint64_t seed = 0);

  /// Random geometry (dims per axis within [min_dim, max_dim], anisotropic spacing,
  /// random level subset and slab heights), fully determined by `seed`.
  static PhantomConfig randomized(const LevelSchema& schema, std::uint64_t seed, std::int64_t min_dim = 12,
                                  std::int64_t max_dim = 32);
};

struct Phantom {
  ImageVolume image;
  LabelVolume labels;
};

Phantom generate_phantom(const PhantomConfig& cfg, const LevelSchema& schema);

/// In-plane voxel count of the region a level occupies.
std::int64_t region_area(const PhantomConfig& cfg, const LevelSchema& schema, LevelId id);

/// Moves every craniocaudal boundary between two different levels by a random number of
/// slices in [-max_shift, +max_shift], drawn independently per (i, j) column and boundary.
LabelVolume perturb_boundary_jitter(const LabelVolume& labels, const LevelSchema& schema, int max_shift_slices,
                                    std::uint64_t seed);

enum class MorphMode { erode, dilate };

struct MorphResult {
  LabelVolume labels;
  bool annihilated = false;  // erosion removed every voxel of the level
};

/// Erodes or dilates one level by `radius` iterations of the 6-neighborhood. Dilation
/// only claims background voxels; other levels are never touched.
MorphResult perturb_morphological(const LabelVolume& labels, LevelId level, int radius, MorphMode mode);

inline constexpr std::int64_t kOracleMaxDim = 64;

/// Brute-force reference for evaluate_case: set arithmetic for volumetric Dice and
/// all-pairs distances for surface Dice and Hausdorff. Levels are every non-background
/// id present in either volume. Throws DomainError when any dimension exceeds 64.
MetricReport oracle_metrics(const LabelVolume& pred, const LabelVolume& ref, const VoxelGrid& grid, double tol_mm);

/// Oracle variant evaluating several tolerances in one all-pairs sweep.
std::vector<MetricReport> oracle_metrics(const LabelVolume& pred, const LabelVolume& ref, const VoxelGrid& grid,
                                         const std::vector<double>& tolerances_mm);

}  // namespace lnl::phantom

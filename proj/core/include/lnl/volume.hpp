#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lnl/errors.hpp"

namespace lnl {

/// Anatomical direction that an index axis points to as its index increases.
enum class AxisCode : std::uint8_t { R, L, A, P, S, I };

char axis_code_char(AxisCode c) noexcept;
AxisCode axis_code_from_char(char c);
/// The code on the same anatomical line pointing the other way (R<->L, A<->P, S<->I).
AxisCode opposite(AxisCode c) noexcept;
/// 0 for left-right, 1 for anterior-posterior, 2 for superior-inferior.
int anatomical_line(AxisCode c) noexcept;

using Index3 = std::array<std::int64_t, 3>;
using Vec3 = std::array<double, 3>;
using AxisCodes = std::array<AxisCode, 3>;

/// Geometry of a volume. Voxels are stored with i fastest and k slowest, so an axial
/// slice (fixed k) is contiguous. In memory the k-axis always runs inferior to superior.
struct VoxelGrid {
  Index3 dims{1, 1, 1};
  Vec3 spacing_mm{1.0, 1.0, 1.0};
  Vec3 origin_mm{0.0, 0.0, 0.0};
  AxisCodes axes{AxisCode::R, AxisCode::A, AxisCode::S};

  std::size_t voxel_count() const noexcept {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t slice_size() const noexcept {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]);
  }
  std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return static_cast<std::size_t>(i + dims[0] * (j + dims[1] * k));
  }
  bool contains(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }
  /// Scanner (RAS+) position of a voxel center in mm.
  Vec3 world(double i, double j, double k) const noexcept;
  /// Index axis whose anatomical line is `line` (see anatomical_line), or -1.
  int axis_for_line(int line) const noexcept;

  /// Throws ValidationError when dims < 1 or spacing <= 0 / non-finite.
  void validate() const;
  std::string describe() const;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;
};

struct GeometryCheck {
  bool compatible = true;
  std::vector<std::string> mismatches;  // one entry per offending field
  explicit operator bool() const noexcept { return compatible; }
};

inline constexpr double kSpacingTolMm = 1e-6;
inline constexpr double kOriginTolMm = 1e-3;

GeometryCheck check_geometry_compatible(const VoxelGrid& a, const VoxelGrid& b);

template <typename T>
struct Volume {
  using value_type = T;

  VoxelGrid grid;
  std::vector<T> voxels;

  Volume() = default;
  explicit Volume(VoxelGrid g, T fill = T{}) : grid(std::move(g)) {
    grid.validate();
    voxels.assign(grid.voxel_count(), fill);
  }
  Volume(VoxelGrid g, std::vector<T> data) : grid(std::move(g)), voxels(std::move(data)) {
    grid.validate();
    if (voxels.size() != grid.voxel_count()) {
      throw ValidationError("voxel payload size " + std::to_string(voxels.size()) +
                            " does not match grid " + grid.describe());
    }
  }

  T& at(std::int64_t i, std::int64_t j, std::int64_t k) { return voxels[grid.index(i, j, k)]; }
  const T& at(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return voxels[grid.index(i, j, k)];
  }
  std::size_t size() const noexcept { return voxels.size(); }

  friend bool operator==(const Volume&, const Volume&) = default;
};

template <typename A, typename B>
GeometryCheck check_geometry_compatible(const Volume<A>& a, const Volume<B>& b) {
  return check_geometry_compatible(a.grid, b.grid);
}

/// CT intensities in Hounsfield units.
using ImageVolume = Volume<float>;
/// Binary mask, 0 or 1 per voxel.
using MaskVolume = Volume<std::uint8_t>;

/// Per-voxel class ids; 0 is background. `schema_id` names the LevelSchema the ids come from.
struct LabelVolume : Volume<std::uint8_t> {
  std::string schema_id;

  LabelVolume() = default;
  LabelVolume(VoxelGrid g, std::string schema = {})
      : Volume<std::uint8_t>(std::move(g), 0), schema_id(std::move(schema)) {}
  LabelVolume(VoxelGrid g, std::vector<std::uint8_t> data, std::string schema = {})
      : Volume<std::uint8_t>(std::move(g), std::move(data)), schema_id(std::move(schema)) {}

  friend bool operator==(const LabelVolume&, const LabelVolume&) = default;
};

/// Voxel counts per class id.
std::array<std::size_t, 256> label_histogram(const LabelVolume& labels);

/// Mask of voxels equal to `id` (or, for `id < 0`, of every non-background voxel).
MaskVolume label_mask(const LabelVolume& labels, int id);

}  // namespace lnl

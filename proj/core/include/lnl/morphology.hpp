#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lnl/volume.hpp"

namespace lnl {

enum class Connectivity { face6 = 6, full26 = 26 };

/// Connected components of equal non-zero values (0 is never labeled).
struct ComponentLabeling {
  std::vector<std::uint32_t> component;  // per voxel; 0 for value 0
  std::vector<std::size_t> size;         // indexed by component id, size[0] unused
  std::vector<std::size_t> first_voxel;  // earliest linear index in k-major scan order
  std::vector<std::uint8_t> value;       // voxel value the component carries

  std::size_t count() const noexcept { return size.empty() ? 0 : size.size() - 1; }
};

ComponentLabeling label_components(const Volume<std::uint8_t>& volume, Connectivity connectivity);

/// Keeps only the largest component of a binary mask. Ties go to the component whose
/// first voxel comes earliest in scan order.
MaskVolume keep_largest_component(const MaskVolume& mask, Connectivity connectivity);

/// Binary dilation/erosion with an axis-aligned box of half-width `radius` voxels per
/// axis. Out-of-volume voxels are ignored, so closing never removes mask voxels.
MaskVolume dilate_box(const MaskVolume& mask, const std::array<int, 3>& radius);
MaskVolume erode_box(const MaskVolume& mask, const std::array<int, 3>& radius);
/// Closing with a cube of edge `size` voxels (size odd, >= 1).
MaskVolume close_cube(const MaskVolume& mask, int size);

}  // namespace lnl

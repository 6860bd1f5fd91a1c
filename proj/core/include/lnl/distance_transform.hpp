#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lnl/volume.hpp"

namespace lnl {

/// Exact squared Euclidean distance transform on an anisotropic grid (lower envelope of
/// parabolas, one separable pass per axis). Returns, for every grid point, the squared
/// distance in mm^2 to the nearest point with `seeds[i] != 0`; +inf when there are no seeds.
///
/// Along each axis the offset to the chosen site is formed as (q - site) * spacing, so
/// values are the same float expression a direct ((dx*sx)^2 + (dy*sy)^2) + (dz*sz)^2
/// evaluation gives, up to the envelope's selection among ties.
std::vector<double> squared_edt(std::span<const std::uint8_t> seeds, const Index3& dims, const Vec3& spacing_mm);

}  // namespace lnl

#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "lnl/errors.hpp"
#include "lnl/schema.hpp"
#include "lnl/volume.hpp"

namespace lnl {

/// Half-open voxel box: [min[a], max[a]) along each index axis.
struct CropBox {
  Index3 min{0, 0, 0};
  Index3 max{0, 0, 0};

  static CropBox full(const VoxelGrid& g) { return {{0, 0, 0}, g.dims}; }
  Index3 extent() const noexcept { return {max[0] - min[0], max[1] - min[1], max[2] - min[2]}; }
  /// Throws RangeError unless 0 <= min < max <= dims on every axis.
  void check_within(const VoxelGrid& g) const;
  /// Box `inner` (relative to this box) expressed in this box's parent coordinates.
  CropBox compose(const CropBox& inner) const noexcept;
};

/// Foreground masking parameters. Defaults match the ROI-auto settings
/// otsuPercentileThreshold 0.01, thresholdCorrectionFactor 0.3, closingSize 9,
/// ROIAutoDilateSize 2.
struct OtsuMaskParams {
  double percentile_clip = 0.01;
  double threshold_correction = 0.3;
  int closing_size_voxels = 9;
  int dilate_size_voxels = 2;

  void validate() const;
};

struct OtsuThresholds {
  double low = 0.0;        // clipped minimum
  double high = 0.0;       // clipped maximum
  double otsu = 0.0;       // between-class-variance maximizer on the clipped histogram
  double corrected = 0.0;  // low + threshold_correction * (otsu - low)
};

inline constexpr int kOtsuBins = 256;
inline constexpr float kAirFillHu = -1024.0f;

template <typename V>
V crop_to_box(const V& volume, const CropBox& box) {
  box.check_within(volume.grid);
  V out = volume;
  const auto ext = box.extent();
  out.grid.dims = ext;
  out.grid.origin_mm = volume.grid.world(static_cast<double>(box.min[0]), static_cast<double>(box.min[1]),
                                         static_cast<double>(box.min[2]));
  out.voxels.assign(out.grid.voxel_count(), typename V::value_type{});
  for (std::int64_t k = 0; k < ext[2]; ++k) {
    for (std::int64_t j = 0; j < ext[1]; ++j) {
      const auto* src = &volume.voxels[volume.grid.index(box.min[0], box.min[1] + j, box.min[2] + k)];
      auto* dst = &out.voxels[out.grid.index(0, j, k)];
      std::copy(src, src + ext[0], dst);
    }
  }
  return out;
}

/// Steps 1-4 of foreground_mask_otsu: clipping quantiles, Otsu threshold and its correction.
OtsuThresholds compute_otsu_thresholds(const ImageVolume& image, const OtsuMaskParams& params);

/// Voxels >= threshold, before any connectivity or morphology.
MaskVolume threshold_mask(const ImageVolume& image, double threshold);

/// Full masking pipeline: clip, Otsu, correct, binarize, keep largest face-connected
/// component, close with a cube of edge closing_size_voxels, dilate by dilate_size_voxels.
MaskVolume foreground_mask_otsu(const ImageVolume& image, const OtsuMaskParams& params = {});

/// Sets voxels outside `mask` to `fill_hu`.
ImageVolume apply_mask(const ImageVolume& image, const MaskVolume& mask, float fill_hu = kAirFillHu);

/// Flips along the left-right index axis and swaps every level id for its mirror partner.
LabelVolume mirror_with_label_swap(const LabelVolume& labels, const LevelSchema& schema);

}  // namespace lnl

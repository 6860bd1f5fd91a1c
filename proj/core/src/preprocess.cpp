#include "lnl/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lnl/morphology.hpp"

namespace lnl {

void CropBox::check_within(const VoxelGrid& g) const {
  for (int a = 0; a < 3; ++a) {
    if (min[a] < 0 || min[a] >= max[a] || max[a] > g.dims[a]) {
      throw RangeError("crop box [" + std::to_string(min[a]) + ", " + std::to_string(max[a]) +
                       ") on axis " + std::to_string(a) + " is outside 0.." + std::to_string(g.dims[a]));
    }
  }
}

CropBox CropBox::compose(const CropBox& inner) const noexcept {
  CropBox out;
  for (int a = 0; a < 3; ++a) {
    out.min[a] = min[a] + inner.min[a];
    out.max[a] = min[a] + inner.max[a];
  }
  return out;
}

void OtsuMaskParams::validate() const {
  std::string problems;
  if (!(percentile_clip >= 0.0 && percentile_clip < 0.5)) problems += " percentile_clip must be in [0, 0.5);";
  if (!(threshold_correction > 0.0)) problems += " threshold_correction must be > 0;";
  if (closing_size_voxels < 1 || closing_size_voxels % 2 == 0) problems += " closing_size must be odd and >= 1;";
  if (dilate_size_voxels < 0) problems += " dilate_size must be >= 0;";
  if (!problems.empty()) throw ValidationError("invalid Otsu mask parameters:" + problems);
}

namespace {

// Type-7 quantile of `values` (reorders the buffer).
double quantile7(std::vector<float>& values, double p) {
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double a = values[lo];
  if (lo + 1 >= values.size() || h == static_cast<double>(lo)) return a;
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return a + (h - static_cast<double>(lo)) * (b - a);
}

}  // namespace

OtsuThresholds compute_otsu_thresholds(const ImageVolume& image, const OtsuMaskParams& params) {
  params.validate();
  if (image.voxels.empty()) throw DegenerateInputError("empty image");
  const auto [mn, mx] = std::minmax_element(image.voxels.begin(), image.voxels.end());
  if (!(*mn < *mx)) throw DegenerateInputError("image is constant; Otsu masking needs two intensities");

  OtsuThresholds t;
  {
    std::vector<float> buf(image.voxels);
    t.low = quantile7(buf, params.percentile_clip);
    t.high = quantile7(buf, 1.0 - params.percentile_clip);
  }
  if (!(t.low < t.high)) {
    // Clipping collapsed the range (one intensity dominates); fall back to the raw range.
    t.low = *mn;
    t.high = *mx;
  }

  const double width = (t.high - t.low) / kOtsuBins;
  std::vector<double> hist(kOtsuBins, 0.0);
  for (float v : image.voxels) {
    const double c = std::clamp(static_cast<double>(v), t.low, t.high);
    const auto bin = std::min(kOtsuBins - 1, static_cast<int>((c - t.low) / width));
    hist[bin] += 1.0;
  }

  double total = 0.0, total_mean = 0.0;
  for (int b = 0; b < kOtsuBins; ++b) {
    total += hist[b];
    total_mean += hist[b] * (b + 0.5);
  }
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_split = 0;
  for (int b = 0; b < kOtsuBins - 1; ++b) {
    w0 += hist[b];
    sum0 += hist[b] * (b + 0.5);
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (total_mean - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_split = b;
    }
  }
  t.otsu = t.low + (best_split + 1) * width;
  t.corrected = t.low + params.threshold_correction * (t.otsu - t.low);
  return t;
}

MaskVolume threshold_mask(const ImageVolume& image, double threshold) {
  MaskVolume m(image.grid, std::uint8_t{0});
  for (std::size_t i = 0; i < image.size(); ++i) m.voxels[i] = image.voxels[i] >= threshold;
  return m;
}

MaskVolume foreground_mask_otsu(const ImageVolume& image, const OtsuMaskParams& params) {
  const auto t = compute_otsu_thresholds(image, params);
  auto mask = threshold_mask(image, t.corrected);
  mask = keep_largest_component(mask, Connectivity::face6);
  mask = close_cube(mask, params.closing_size_voxels);
  const int d = params.dilate_size_voxels;
  if (d > 0) mask = dilate_box(mask, {d, d, d});
  return mask;
}

ImageVolume apply_mask(const ImageVolume& image, const MaskVolume& mask, float fill_hu) {
  const auto check = check_geometry_compatible(image.grid, mask.grid);
  if (!check) {
    std::string fields;
    for (const auto& f : check.mismatches) fields += " " + f;
    throw GeometryError("mask geometry differs from image:" + fields);
  }
  ImageVolume out = image;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask.voxels[i] == 0) out.voxels[i] = fill_hu;
  }
  return out;
}

LabelVolume mirror_with_label_swap(const LabelVolume& labels, const LevelSchema& schema) {
  if (!labels.schema_id.empty() && labels.schema_id != schema.schema_id) {
    throw ValidationError("label volume uses schema '" + labels.schema_id + "', not '" + schema.schema_id + "'");
  }
  const int axis = labels.grid.axis_for_line(0);
  if (axis < 0) throw GeometryError("axis codes have no left-right axis");
  const auto partner = schema.partner_table();
  LabelVolume out = labels;
  const auto& d = labels.grid.dims;
  for (std::int64_t k = 0; k < d[2]; ++k) {
    for (std::int64_t j = 0; j < d[1]; ++j) {
      for (std::int64_t i = 0; i < d[0]; ++i) {
        std::int64_t src[3] = {i, j, k};
        src[axis] = d[axis] - 1 - src[axis];
        out.at(i, j, k) = partner[labels.at(src[0], src[1], src[2])];
      }
    }
  }
  return out;
}

}  // namespace lnl

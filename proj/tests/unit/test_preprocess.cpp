#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "lnl/morphology.hpp"
#include "lnl/phantom.hpp"
#include "lnl/preprocess.hpp"
#include "test_support.hpp"

using namespace lnl;
using lnl::testing::grid;

TEST_CASE("crop keeps voxels and shifts the origin") {
  ImageVolume v(grid({6, 5, 4}, {0.5, 1.0, 2.0}));
  std::iota(v.voxels.begin(), v.voxels.end(), 0.0f);
  const CropBox box{{1, 2, 1}, {4, 5, 3}};
  const auto c = crop_to_box(v, box);
  CHECK(c.grid.dims == Index3{3, 3, 2});
  CHECK(c.grid.origin_mm == Vec3{0.5, 2.0, 2.0});
  CHECK(c.at(0, 0, 0) == v.at(1, 2, 1));
  CHECK(c.at(2, 2, 1) == v.at(3, 4, 2));
  CHECK_THROWS_AS(crop_to_box(v, CropBox{{0, 0, 0}, {7, 1, 1}}), RangeError);
  CHECK_THROWS_AS(crop_to_box(v, CropBox{{2, 0, 0}, {2, 1, 1}}), RangeError);
}

TEST_CASE("crop boxes compose") {
  const CropBox outer{{2, 3, 4}, {20, 20, 20}};
  const CropBox inner{{1, 1, 1}, {5, 6, 7}};
  const auto c = outer.compose(inner);
  CHECK(c.min == Index3{3, 4, 5});
  CHECK(c.max == Index3{7, 9, 11});
}

TEST_CASE("otsu separates a bimodal image") {
  ImageVolume v(grid({20, 20, 4}), -1000.0f);
  for (std::int64_t k = 0; k < 4; ++k)
    for (std::int64_t j = 5; j < 15; ++j)
      for (std::int64_t i = 5; i < 15; ++i) v.at(i, j, k) = 40.0f;
  const auto t = compute_otsu_thresholds(v, {});
  CHECK(t.otsu > -1000.0);
  CHECK(t.otsu <= 40.0);
  CHECK(t.corrected == doctest::Approx(t.low + 0.3 * (t.otsu - t.low)));
  const auto m = threshold_mask(v, t.corrected);
  CHECK(std::count(m.voxels.begin(), m.voxels.end(), 1) == 400);
}

TEST_CASE("constant image is degenerate") {
  ImageVolume v(grid({4, 4, 4}), 12.0f);
  CHECK_THROWS_AS(compute_otsu_thresholds(v, {}), DegenerateInputError);
}

TEST_CASE("mask parameters are validated") {
  OtsuMaskParams p;
  CHECK_NOTHROW(p.validate());
  p.closing_size_voxels = 4;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = {};
  p.percentile_clip = 0.6;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("foreground mask drops the detached table and keeps the body") {
  const auto schema = default_schema();
  auto cfg = phantom::PhantomConfig::make_default(schema);
  cfg.dims = {48, 40, 16};
  cfg.slabs.clear();
  const auto p = phantom::generate_phantom(cfg, schema);
  const auto mask = foreground_mask_otsu(p.image);
  // Body center inside, table row outside.
  CHECK(mask.at(24, 20, 8) == 1);
  CHECK(mask.at(24, 0, 8) == 0);
  const auto masked = apply_mask(p.image, mask);
  CHECK(masked.at(24, 0, 8) == kAirFillHu);
  CHECK(masked.at(24, 20, 8) == p.image.at(24, 20, 8));
  // Every body voxel survives.
  for (std::size_t n = 0; n < p.image.size(); ++n) {
    if (p.image.voxels[n] == cfg.body_hu) CHECK(mask.voxels[n] == 1);
  }
}

TEST_CASE("apply_mask rejects mismatched grids") {
  ImageVolume v(grid({4, 4, 4}));
  MaskVolume m(grid({4, 4, 3}));
  CHECK_THROWS_AS(apply_mask(v, m), GeometryError);
}

TEST_CASE("mirror swaps sides and partner ids") {
  const auto s = default_schema();
  LabelVolume l(grid({6, 2, 2}), s.schema_id);
  l.at(0, 0, 0) = s.id_of("II_left");
  l.at(2, 1, 1) = s.id_of("Ia");
  const auto m = mirror_with_label_swap(l, s);
  CHECK(m.at(5, 0, 0) == s.id_of("II_right"));
  CHECK(m.at(3, 1, 1) == s.id_of("Ia"));
  CHECK(mirror_with_label_swap(m, s) == l);
  LabelVolume other(grid({2, 2, 2}), "other");
  CHECK_THROWS(mirror_with_label_swap(other, s));
}

TEST_CASE("components follow the connectivity") {
  MaskVolume m(grid({3, 3, 1}));
  m.at(0, 0, 0) = 1;
  m.at(1, 1, 0) = 1;
  CHECK(label_components(m, Connectivity::face6).count() == 2);
  CHECK(label_components(m, Connectivity::full26).count() == 1);
}

TEST_CASE("keep_largest_component breaks ties by scan order") {
  MaskVolume m(grid({5, 1, 1}));
  m.at(0, 0, 0) = 1;
  m.at(2, 0, 0) = 1;
  m.at(4, 0, 0) = 1;
  const auto k = keep_largest_component(m, Connectivity::face6);
  CHECK(k.voxels == std::vector<std::uint8_t>{1, 0, 0, 0, 0});
}

TEST_CASE("box morphology matches brute force") {
  MaskVolume m(grid({7, 6, 5}));
  for (std::size_t n = 0; n < m.size(); ++n) m.voxels[n] = ((n * 2654435761u) >> 7) % 5 == 0;
  const std::array<int, 3> r{1, 2, 1};
  const auto d = dilate_box(m, r);
  const auto e = erode_box(m, r);
  const auto& g = m.grid;
  for (std::int64_t k = 0; k < 5; ++k)
    for (std::int64_t j = 0; j < 6; ++j)
      for (std::int64_t i = 0; i < 7; ++i) {
        bool any = false, all = true;
        for (std::int64_t c = -r[2]; c <= r[2]; ++c)
          for (std::int64_t b = -r[1]; b <= r[1]; ++b)
            for (std::int64_t a = -r[0]; a <= r[0]; ++a) {
              if (!g.contains(i + a, j + b, k + c)) continue;
              const bool v = m.at(i + a, j + b, k + c);
              any |= v;
              all &= v;
            }
        CHECK(d.at(i, j, k) == any);
        CHECK(e.at(i, j, k) == all);
      }
  const auto c = close_cube(m, 3);
  for (std::size_t n = 0; n < m.size(); ++n) {
    if (m.voxels[n]) CHECK(c.voxels[n] == 1);
  }
}

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lnl/distance_transform.hpp"
#include "lnl/metrics.hpp"
#include "lnl/phantom.hpp"
#include "test_support.hpp"

using namespace lnl;
using lnl::testing::grid;

namespace {

MaskVolume box(const VoxelGrid& g, Index3 lo, Index3 hi) {
  MaskVolume m(g);
  for (std::int64_t k = lo[2]; k < hi[2]; ++k)
    for (std::int64_t j = lo[1]; j < hi[1]; ++j)
      for (std::int64_t i = lo[0]; i < hi[0]; ++i) m.at(i, j, k) = 1;
  return m;
}

LabelVolume as_labels(const MaskVolume& m, LevelId id) {
  LabelVolume l(m.grid);
  for (std::size_t n = 0; n < m.size(); ++n) l.voxels[n] = m.voxels[n] ? id : 0;
  return l;
}

}  // namespace

TEST_CASE("squared EDT matches brute force on an anisotropic grid") {
  const Index3 dims{9, 7, 5};
  const Vec3 sp{0.7, 1.3, 2.5};
  std::vector<std::uint8_t> seeds(9 * 7 * 5, 0);
  std::mt19937_64 rng(3);
  for (int n = 0; n < 6; ++n) seeds[rng() % seeds.size()] = 1;
  const auto d = squared_edt(seeds, dims, sp);
  for (std::int64_t k = 0; k < 5; ++k)
    for (std::int64_t j = 0; j < 7; ++j)
      for (std::int64_t i = 0; i < 9; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::int64_t c = 0; c < 5; ++c)
          for (std::int64_t b = 0; b < 7; ++b)
            for (std::int64_t a = 0; a < 9; ++a) {
              if (!seeds[a + 9 * (b + 7 * c)]) continue;
              const double dx = (i - a) * sp[0], dy = (j - b) * sp[1], dz = (k - c) * sp[2];
              best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
        CHECK(d[i + 9 * (j + 7 * k)] == doctest::Approx(best).epsilon(1e-12));
      }
}

TEST_CASE("squared EDT without seeds is infinite") {
  std::vector<std::uint8_t> seeds(8, 0);
  for (double v : squared_edt(seeds, {2, 2, 2}, {1, 1, 1})) CHECK(std::isinf(v));
}

TEST_CASE("identical masks score perfectly") {
  const auto g = grid({8, 8, 8}, {1, 1, 2});
  const auto a = box(g, {2, 2, 2}, {6, 5, 7});
  CHECK(volumetric_dice(a, a) == 1.0);
  CHECK(surface_dice(a, a, 0.0) == 1.0);
  CHECK(hausdorff_max(a, a) == 0.0);
}

TEST_CASE("one-voxel shift of a cube") {
  const auto g = grid({10, 10, 10});
  const auto a = box(g, {2, 2, 2}, {6, 6, 6});
  const auto b = box(g, {3, 2, 2}, {7, 6, 6});
  CHECK(volumetric_dice(a, b) == doctest::Approx(0.75));
  CHECK(hausdorff_max(a, b) == doctest::Approx(1.0));
  CHECK(surface_dice(a, b, 1.0) == doctest::Approx(1.0));
  // At 0.5 mm only the faces shared exactly count: the four side walls overlap on 3 of
  // 4 columns; end caps never coincide.
  CHECK(surface_dice(a, b, 0.0) == doctest::Approx(2.0 * 4 * 12 / (2.0 * 96)));
}

TEST_CASE("empty masks") {
  const auto g = grid({4, 4, 4});
  const MaskVolume e(g);
  const auto a = box(g, {1, 1, 1}, {2, 2, 2});
  CHECK(volumetric_dice(e, e) == 1.0);
  CHECK(surface_dice(e, e, 1.0) == 1.0);
  CHECK(volumetric_dice(a, e) == 0.0);
  CHECK(surface_dice(a, e, 1.0) == 0.0);
  CHECK_THROWS_AS(hausdorff_max(a, e), DegenerateInputError);
  CHECK_THROWS_AS(surface_dice(a, a, -1.0), DomainError);
}

TEST_CASE("default tolerance is the coarsest spacing") {
  CHECK(default_tolerance(grid({2, 2, 2}, {0.8, 0.9, 3.0})) == 3.0);
}

TEST_CASE("evaluate_case lists every present level and the union") {
  const auto s = default_schema();
  const auto g = grid({10, 10, 10}, {1, 1, 2});
  auto ref = as_labels(box(g, {1, 1, 1}, {5, 5, 5}), 4);
  auto pred = as_labels(box(g, {1, 1, 1}, {5, 5, 5}), 4);
  pred.at(8, 8, 8) = 7;
  const auto r = evaluate_case(pred, ref, s, std::nullopt, "c1");
  CHECK(r.tolerance_mm == 2.0);
  REQUIRE(r.levels.size() == 2);
  CHECK(r.find(4)->vol_dice == 1.0);
  CHECK(r.find(7)->vol_dice == 0.0);
  CHECK_FALSE(r.find(7)->hausdorff_max_mm.has_value());
  CHECK(r.union_metrics.vol_dice.value() < 1.0);
  const auto rows = r.csv_rows(s, "model");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("c1,model,II_left,1,1,0", 0) == 0);
  CHECK(rows[1].find("III_right,0,0,") != std::string::npos);
  CHECK(MetricReport::csv_header(true) == "case,set,level,vol_dice,surf_dice,hd_max_mm");
}

TEST_CASE("evaluate_case rejects mismatched grids") {
  const auto s = default_schema();
  LabelVolume a(grid({4, 4, 4}));
  LabelVolume b(grid({4, 4, 4}, {1, 1, 2}));
  CHECK_THROWS_AS(evaluate_case(a, b, s), GeometryError);
}

TEST_CASE("metrics agree with the brute-force oracle on random phantoms") {
  const auto s = default_schema();
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto cfg = phantom::PhantomConfig::randomized(s, seed, 10, 20);
    const auto ref = phantom::generate_phantom(cfg, s).labels;
    const auto pred = phantom::perturb_boundary_jitter(ref, s, 2, seed + 100);
    for (double tol : {0.5, 1.0, 3.0}) {
      const auto m = evaluate_case(pred, ref, s, tol);
      const auto o = phantom::oracle_metrics(pred, ref, ref.grid, tol);
      REQUIRE(m.levels.size() == o.levels.size());
      for (std::size_t n = 0; n < m.levels.size(); ++n) {
        CHECK(m.levels[n].level == o.levels[n].level);
        CHECK(m.levels[n].vol_dice == o.levels[n].vol_dice);
        CHECK(m.levels[n].surf_dice.value() == doctest::Approx(o.levels[n].surf_dice.value()).epsilon(1e-9));
        CHECK(m.levels[n].hausdorff_max_mm.has_value() == o.levels[n].hausdorff_max_mm.has_value());
        if (m.levels[n].hausdorff_max_mm) {
          CHECK(*m.levels[n].hausdorff_max_mm == doctest::Approx(*o.levels[n].hausdorff_max_mm).epsilon(1e-9));
        }
      }
    }
  }
}

#include <doctest.h>

#include <algorithm>
#include <set>

#include "lnl/phantom.hpp"
#include "lnl/postprocess.hpp"
#include "test_support.hpp"

using namespace lnl;
using namespace lnl::phantom;

TEST_CASE("default phantom instantiates every level with its slab volume") {
  const auto s = default_schema();
  const auto cfg = PhantomConfig::make_default(s);
  CHECK(cfg.slabs.size() == 20);
  const auto p = generate_phantom(cfg, s);
  const auto h = label_histogram(p.labels);
  for (const auto& slab : cfg.slabs) {
    CHECK(h[slab.id] == static_cast<std::size_t>(slab.height * region_area(cfg, s, slab.id)));
  }
  CHECK(slice_consistency_violations(p.labels, s).empty());
  CHECK(p.image.at(0, 39, 0) == cfg.air_hu);
  CHECK(p.image.at(24, 20, 0) == cfg.body_hu);
  CHECK(p.image.at(0, 0, 0) == cfg.table_hu);
}

TEST_CASE("left levels sit on the left side of the patient") {
  const auto s = default_schema();
  const auto cfg = PhantomConfig::make_default(s);
  const auto p = generate_phantom(cfg, s);
  for (const auto& slab : cfg.slabs) {
    const auto* l = s.find(slab.id);
    if (l->laterality == Laterality::midline) continue;
    const auto k = slab.k_begin;
    // With an R-pointing i axis, patient left is at low i.
    const std::int64_t i = l->laterality == Laterality::left ? cfg.i_begin : cfg.i_end - 1;
    CHECK(p.labels.at(i, cfg.j_begin, k) == slab.id);
  }
}

TEST_CASE("generation is deterministic and configs are validated") {
  const auto s = default_schema();
  const auto a = PhantomConfig::randomized(s, 42);
  const auto b = PhantomConfig::randomized(s, 42);
  CHECK(a.to_json() == b.to_json());
  CHECK(PhantomConfig::randomized(s, 43).to_json() != a.to_json());
  CHECK(generate_phantom(a, s).labels == generate_phantom(b, s).labels);

  auto bad = PhantomConfig::make_default(s);
  bad.slabs.push_back({s.id_of("II_left"), 70, 8});
  CHECK_THROWS_AS(bad.validate(s), ValidationError);
  bad = PhantomConfig::make_default(s);
  bad.slabs.push_back({s.id_of("II_left"), 6, 2});
  CHECK_THROWS_AS(bad.validate(s), ValidationError);
  bad = PhantomConfig::make_default(s);
  bad.lateral_split = 9;
  CHECK_THROWS_AS(bad.validate(s), ValidationError);
}

TEST_CASE("randomized configs are always feasible") {
  const auto s = default_schema();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto c = PhantomConfig::randomized(s, seed);
    CHECK_NOTHROW(c.validate(s));
    for (auto d : c.dims) CHECK(d <= 32);
  }
}

TEST_CASE("boundary jitter moves only level-level boundaries within the bound") {
  const auto s = default_schema();
  const auto cfg = PhantomConfig::make_default(s);
  const auto ref = generate_phantom(cfg, s).labels;
  const auto j = perturb_boundary_jitter(ref, s, 1, 9);
  CHECK(j != ref);
  CHECK(perturb_boundary_jitter(ref, s, 1, 9) == j);
  std::size_t fg_ref = 0, fg_j = 0;
  for (std::size_t n = 0; n < ref.size(); ++n) {
    fg_ref += ref.voxels[n] != 0;
    fg_j += j.voxels[n] != 0;
    // A changed voxel takes the label of a neighbor slab in the same column.
    if (ref.voxels[n] != j.voxels[n]) CHECK(ref.voxels[n] != 0);
  }
  CHECK(fg_ref == fg_j);
  CHECK_THROWS_AS(perturb_boundary_jitter(ref, s, 0, 1), DomainError);
}

TEST_CASE("morphological perturbation") {
  const auto s = default_schema();
  const auto ref = generate_phantom(PhantomConfig::make_default(s), s).labels;
  const LevelId id = s.id_of("Ia");
  const auto before = label_histogram(ref)[id];
  const auto grown = perturb_morphological(ref, id, 1, MorphMode::dilate);
  CHECK(label_histogram(grown.labels)[id] > before);
  const auto shrunk = perturb_morphological(ref, id, 1, MorphMode::erode);
  CHECK(label_histogram(shrunk.labels)[id] < before);
  CHECK_FALSE(shrunk.annihilated);
  const auto gone = perturb_morphological(ref, id, 20, MorphMode::erode);
  CHECK(gone.annihilated);
  CHECK_THROWS_AS(perturb_morphological(ref, 0, 1, MorphMode::erode), DomainError);
  // Dilation never overwrites other levels.
  for (std::size_t n = 0; n < ref.size(); ++n) {
    if (ref.voxels[n] != 0 && ref.voxels[n] != id) CHECK(grown.labels.voxels[n] == ref.voxels[n]);
  }
}

TEST_CASE("oracle refuses large volumes") {
  LabelVolume big(lnl::testing::grid({65, 2, 2}));
  CHECK_THROWS_AS(oracle_metrics(big, big, big.grid, 1.0), DomainError);
}

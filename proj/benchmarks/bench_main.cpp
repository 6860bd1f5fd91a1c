#include <benchmark/benchmark.h>

#include "lnl/distance_transform.hpp"
#include "lnl/metrics.hpp"
#include "lnl/phantom.hpp"
#include "lnl/postprocess.hpp"
#include "lnl/stats.hpp"

namespace {

using namespace lnl;

// Default phantom layout scaled in-plane to `n` x `n` with `depth` slices.
phantom::PhantomConfig scaled_config(const LevelSchema& s, std::int64_t n, std::int64_t depth) {
  auto cfg = phantom::PhantomConfig::make_default(s);
  const double fi = static_cast<double>(n) / static_cast<double>(cfg.dims[0]);
  const double fj = static_cast<double>(n) / static_cast<double>(cfg.dims[1]);
  const std::int64_t fk = depth / cfg.dims[2];
  auto si = [&](std::int64_t v) { return static_cast<std::int64_t>(static_cast<double>(v) * fi); };
  auto sj = [&](std::int64_t v) { return static_cast<std::int64_t>(static_cast<double>(v) * fj); };
  cfg.dims = {n, n, cfg.dims[2] * fk};
  cfg.i_begin = si(cfg.i_begin);
  cfg.i_end = si(cfg.i_end);
  cfg.lateral_split = si(cfg.lateral_split);
  cfg.midline_half_width = si(cfg.midline_half_width);
  cfg.j_begin = sj(cfg.j_begin);
  cfg.j_end = sj(cfg.j_end);
  cfg.body_center_i *= fi;
  cfg.body_radius_i *= fi;
  cfg.body_center_j *= fj;
  cfg.body_radius_j *= fj;
  cfg.table_thickness = sj(cfg.table_thickness);
  for (auto& slab : cfg.slabs) {
    slab.k_begin *= fk;
    slab.height *= fk;
  }
  return cfg;
}

void BM_SlicePlaneAdjust(benchmark::State& state) {
  const auto s = default_schema();
  const auto cfg = scaled_config(s, state.range(0), state.range(1));
  const auto labels = phantom::perturb_boundary_jitter(phantom::generate_phantom(cfg, s).labels, s, 1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(slice_plane_adjust(labels, s));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(labels.size()));
}
BENCHMARK(BM_SlicePlaneAdjust)->Args({128, 72})->Args({256, 144})->Args({512, 144})->Unit(benchmark::kMillisecond);

void BM_EvaluateCase(benchmark::State& state) {
  const auto s = default_schema();
  const auto cfg = scaled_config(s, state.range(0), 72);
  const auto ref = phantom::generate_phantom(cfg, s).labels;
  const auto pred = phantom::perturb_boundary_jitter(ref, s, 2, 4);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_case(pred, ref, s));
}
BENCHMARK(BM_EvaluateCase)->Arg(48)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SquaredEdt(benchmark::State& state) {
  const auto n = state.range(0);
  const Index3 dims{n, n, n};
  std::vector<std::uint8_t> seeds(static_cast<std::size_t>(n * n * n), 0);
  for (std::size_t v = 0; v < seeds.size(); v += 997) seeds[v] = 1;
  for (auto _ : state) benchmark::DoNotOptimize(squared_edt(seeds, dims, {0.9, 0.9, 3.0}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(seeds.size()));
}
BENCHMARK(BM_SquaredEdt)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SignedRankExact(benchmark::State& state) {
  stats::PairedSample ps;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    ps.x.push_back(static_cast<double>((i * 37) % 23) * 0.5);
    ps.y.push_back(static_cast<double>((i * 11) % 19) * 0.5 + 0.25);
  }
  for (auto _ : state) benchmark::DoNotOptimize(stats::wilcoxon_signed_rank(ps, stats::Mode::exact));
}
BENCHMARK(BM_SignedRankExact)->Arg(12)->Arg(20)->Arg(40);

}  // namespace
BENCHMARK_MAIN();

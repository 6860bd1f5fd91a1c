// lnl: command-line front end for the lymph node level toolkit.
//
// Exit codes: 0 success, 1 internal error, 2 usage or input error.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "csv.hpp"
#include "lnl/errors.hpp"
#include "lnl/metrics.hpp"
#include "lnl/nifti.hpp"
#include "lnl/phantom.hpp"
#include "lnl/postprocess.hpp"
#include "lnl/preprocess.hpp"
#include "lnl/review.hpp"
#include "lnl/schema.hpp"
#include "lnl/stats.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInternal = 1;
constexpr int kInput = 2;

struct Globals {
  std::string schema_path;
  std::uint64_t seed = 0;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());

  lnl::LevelSchema schema() const {
    return schema_path.empty() ? lnl::default_schema() : lnl::load_schema(schema_path);
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  lnl::nifti::write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// ---------------------------------------------------------------------------------------
// preprocess

struct PreprocessArgs {
  std::string input, output, mask_output;
  std::vector<std::int64_t> crop;
  lnl::OtsuMaskParams params;
};

int cmd_preprocess(const PreprocessArgs& a) {
  a.params.validate();
  auto image = lnl::nifti::read_image(a.input);
  lnl::CropBox box = lnl::CropBox::full(image.grid);
  if (!a.crop.empty()) {
    if (a.crop.size() != 6) throw lnl::DomainError("--crop takes six integers: i0,j0,k0,i1,j1,k1");
    box = {{a.crop[0], a.crop[1], a.crop[2]}, {a.crop[3], a.crop[4], a.crop[5]}};
  }
  const auto cropped = lnl::crop_to_box(image, box);
  const auto mask = lnl::foreground_mask_otsu(cropped, a.params);
  const auto out = lnl::apply_mask(cropped, mask);
  lnl::nifti::write(out, a.output);
  if (!a.mask_output.empty()) lnl::nifti::write(mask, a.mask_output);
  const auto kept = static_cast<std::size_t>(std::count(mask.voxels.begin(), mask.voxels.end(), 1));
  std::cout << "cropped " << image.grid.describe() << " -> " << cropped.grid.describe() << "\n"
            << "foreground voxels " << kept << " of " << mask.size() << ", masked " << mask.size() - kept
            << "\nwrote " << a.output << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------------------
// postprocess

struct PostprocessArgs {
  std::string input, output, report;
  lnl::SliceAdjustConfig cfg;
  bool components = false;
  std::string order = "components-first";
  std::vector<std::string> component_levels;
};

int cmd_postprocess(const Globals& g, const PostprocessArgs& a) {
  a.cfg.validate();
  const auto schema = g.schema();
  const auto input = lnl::nifti::read_labels(a.input, schema.schema_id);
  std::optional<std::vector<lnl::LevelId>> which;
  if (!a.component_levels.empty()) {
    which.emplace();
    for (const auto& n : a.component_levels) which->push_back(schema.id_of(n));
  }

  const auto t0 = std::chrono::steady_clock::now();
  lnl::LabelVolume labels = input;
  lnl::AdjustmentReport report;
  auto components = [&] {
    if (a.components) labels = lnl::largest_component_per_label(labels, schema, which);
  };
  if (a.order == "components-first") components();
  auto adjusted = lnl::slice_plane_adjust(labels, schema, a.cfg);
  labels = std::move(adjusted.labels);
  report = std::move(adjusted.report);
  if (a.order == "adjust-first") components();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  lnl::nifti::write(labels, a.output);
  if (!a.report.empty()) write_text(a.report, report.to_json(schema, elapsed));
  std::size_t changed = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) changed += labels.voxels[n] != input.voxels[n];
  std::cout << "exclusion fixes " << report.exclusions.size() << ", boundary clears " << report.boundary.size()
            << ", voxels changed " << changed << ", remaining violations "
            << lnl::slice_consistency_violations(labels, schema).size() << "\n"
            << "wall-clock " << fixed(elapsed, 3) << " s for " << labels.grid.describe() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string manifest, reference, output;
  std::optional<double> tolerance;
  std::vector<std::string> sets;
};

struct CaseOutcome {
  std::vector<lnl::MetricReport> reports;  // one per evaluated set
  std::vector<std::string> set_names;
  std::string error;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  const auto m = lnl::cli::load_manifest(a.manifest);
  const auto schema = m.schema && g.schema_path.empty() ? lnl::load_schema(*m.schema) : g.schema();
  m.check_paths_exist();
  if (a.tolerance && *a.tolerance < 0) throw lnl::DomainError("--tolerance must be >= 0");

  std::vector<std::string> sets = a.sets;
  if (sets.empty()) {
    for (const auto& s : m.set_names()) {
      if (s != a.reference) sets.push_back(s);
    }
  }
  if (sets.empty()) throw lnl::DomainError("no contour sets to evaluate besides the reference");

  std::vector<CaseOutcome> outcomes(m.cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c; (c = next.fetch_add(1)) < m.cases.size();) {
      const auto& mc = m.cases[c];
      auto& out = outcomes[c];
      try {
        const auto ref_it = mc.labels.find(a.reference);
        if (ref_it == mc.labels.end()) throw lnl::DomainError("no '" + a.reference + "' labels");
        const auto ref = lnl::nifti::read_labels(ref_it->second, schema.schema_id);
        for (const auto& s : sets) {
          const auto it = mc.labels.find(s);
          if (it == mc.labels.end()) throw lnl::DomainError("no '" + s + "' labels");
          const auto pred = lnl::nifti::read_labels(it->second, schema.schema_id);
          out.reports.push_back(lnl::evaluate_case(pred, ref, schema, a.tolerance, mc.id));
          out.set_names.push_back(s);
        }
      } catch (const lnl::Error& e) {
        out.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n_threads = std::min<std::size_t>(std::max(1u, g.threads), m.cases.size());
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Rows sorted by case id, then set, then level (reports are already level-sorted).
  std::vector<std::size_t> order(m.cases.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return m.cases[x].id < m.cases[y].id; });

  std::ostringstream csv;
  csv << lnl::MetricReport::csv_header(true) << "\n";
  // (set, level, metric) -> values
  std::map<std::string, std::map<int, std::array<std::vector<double>, 3>>> summary;
  std::size_t failed = 0;
  for (auto c : order) {
    const auto& o = outcomes[c];
    if (!o.error.empty()) {
      ++failed;
      csv << m.cases[c].id << ",ERROR,,,,\n";
      std::cerr << "case '" << m.cases[c].id << "' failed: " << o.error << "\n";
      continue;
    }
    for (std::size_t r = 0; r < o.reports.size(); ++r) {
      for (const auto& row : o.reports[r].csv_rows(schema, o.set_names[r])) csv << row << "\n";
      auto add = [&](const lnl::LevelMetrics& lm) {
        auto& slot = summary[o.set_names[r]][lm.level];
        if (lm.vol_dice) slot[0].push_back(*lm.vol_dice);
        if (lm.surf_dice) slot[1].push_back(*lm.surf_dice);
        if (lm.hausdorff_max_mm) slot[2].push_back(*lm.hausdorff_max_mm);
      };
      for (const auto& lm : o.reports[r].levels) add(lm);
      add(o.reports[r].union_metrics);
    }
  }
  write_text(a.output, csv.str());

  static const char* kMetricNames[] = {"vol_dice", "surf_dice", "hd_max_mm"};
  for (const auto& [set, levels] : summary) {
    std::cout << "== " << set << " vs " << a.reference << "\n";
    for (int metric = 0; metric < 3; ++metric) {
      std::cout << kMetricNames[metric] << "\n";
      auto line = [&](int level) {
        const auto it = levels.find(level);
        if (it == levels.end() || it->second[metric].empty()) return;
        const auto name = level == 0 ? std::string("union") : schema.find(static_cast<lnl::LevelId>(level))->name;
        char label[32];
        std::snprintf(label, sizeof label, "  %-12s", name.c_str());
        std::cout << label
                  << lnl::stats::format_descriptive(lnl::stats::descriptive(it->second[metric]), metric == 2 ? 2 : 3)
                  << "\n";
      };
      for (const auto& l : schema.levels) line(l.id);
      line(0);
    }
  }
  std::cout << "wrote " << a.output << " (" << m.cases.size() - failed << " of " << m.cases.size()
            << " cases evaluated)\n";
  return failed == 0 ? kOk : kInput;
}

// ---------------------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::string test = "signed-rank";
  std::string csv, ratings, metrics;
  std::string x, y;
  std::string metric = "vol_dice";
  std::string level = "union";
  std::string mode = "auto";
};

const std::vector<std::string> kTests{"signed-rank", "rank-sum", "levene"};

// Pairs per-case values of two contour sets from a long table; `value_of` returns nullopt
// for rows to skip.
template <typename F>
lnl::stats::PairedSample pair_by_case(const lnl::cli::CsvTable& t, const std::string& case_col,
                                      const std::string& set_col, const std::string& x, const std::string& y,
                                      F&& value_of) {
  const auto ci = t.column(case_col), si = t.column(set_col);
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> acc;
  for (const auto& row : t.rows) {
    const auto v = value_of(row);
    if (!v) continue;
    if (row[si] == x) acc[row[ci]].first.push_back(*v);
    if (row[si] == y) acc[row[ci]].second.push_back(*v);
  }
  lnl::stats::PairedSample ps;
  for (const auto& [id, xy] : acc) {
    if (xy.first.empty() || xy.second.empty()) throw lnl::ParseError("csv", "case '" + id + "' lacks one of the sets");
    double sx = 0, sy = 0;
    for (double v : xy.first) sx += v;
    for (double v : xy.second) sy += v;
    ps.case_ids.push_back(id);
    ps.x.push_back(sx / static_cast<double>(xy.first.size()));
    ps.y.push_back(sy / static_cast<double>(xy.second.size()));
  }
  if (ps.x.empty()) throw lnl::ParseError("csv", "no rows for sets '" + x + "' and '" + y + "'");
  return ps;
}

int cmd_stats(const StatsArgs& a) {
  if (std::find(kTests.begin(), kTests.end(), a.test) == kTests.end()) {
    std::cerr << "unknown test '" << a.test << "'; valid tests:";
    for (const auto& t : kTests) std::cerr << " " << t;
    std::cerr << "\n";
    return kInput;
  }
  const int sources = !a.csv.empty() + !a.ratings.empty() + !a.metrics.empty();
  if (sources != 1) throw lnl::DomainError("give exactly one of --csv, --ratings or --metrics");
  if (a.x.empty() || a.y.empty()) throw lnl::DomainError("--x and --y are required");
  lnl::stats::Mode mode = lnl::stats::Mode::automatic;
  if (a.mode == "exact") mode = lnl::stats::Mode::exact;
  else if (a.mode == "approx") mode = lnl::stats::Mode::approx;
  else if (a.mode != "auto") throw lnl::DomainError("--mode must be auto, exact or approx");

  lnl::stats::PairedSample ps;
  if (!a.csv.empty()) {
    const auto t = lnl::cli::read_csv(a.csv);
    const auto xi = t.column(a.x), yi = t.column(a.y);
    for (const auto& row : t.rows) {
      ps.x.push_back(lnl::cli::parse_number(row[xi], a.x));
      ps.y.push_back(lnl::cli::parse_number(row[yi], a.y));
    }
  } else if (!a.ratings.empty()) {
    const auto t = lnl::cli::read_csv(a.ratings);
    const auto score = t.column("score");
    ps = pair_by_case(t, "case", "contour_set", a.x, a.y, [&](const auto& row) -> std::optional<double> {
      return lnl::cli::parse_number(row[score], "score");
    });
  } else {
    const auto t = lnl::cli::read_csv(a.metrics);
    const auto li = t.column("level"), vi = t.column(a.metric);
    ps = pair_by_case(t, "case", "set", a.x, a.y, [&](const auto& row) -> std::optional<double> {
      if (row[li] != a.level || row[vi].empty()) return std::nullopt;
      return lnl::cli::parse_number(row[vi], a.metric);
    });
  }

  lnl::stats::TestResult r;
  if (a.test == "signed-rank") r = lnl::stats::wilcoxon_signed_rank(ps, mode);
  else if (a.test == "rank-sum") r = lnl::stats::wilcoxon_rank_sum(ps.x, ps.y, mode);
  else r = lnl::stats::paired_levene(ps);

  const auto dx = lnl::stats::descriptive(ps.x), dy = lnl::stats::descriptive(ps.y);
  std::cout << a.x << ": " << lnl::stats::format_descriptive(dx, 3) << "\n"
            << a.y << ": " << lnl::stats::format_descriptive(dy, 3) << "\n"
            << lnl::stats::format_result(r) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------------------
// phantom

struct PhantomArgs {
  std::string output_dir;
  int cases = 1;
  int jitter = 1;
  bool randomized = false;
  int slab_scale = 1;
};

int cmd_phantom(const Globals& g, const PhantomArgs& a) {
  if (a.cases < 1) throw lnl::DomainError("--cases must be >= 1");
  if (a.jitter < 0) throw lnl::DomainError("--jitter must be >= 0");
  if (a.slab_scale < 1) throw lnl::DomainError("--slab-scale must be >= 1");
  const auto schema = g.schema();
  const fs::path dir(a.output_dir);
  fs::create_directories(dir);

  lnl::cli::Manifest m;
  m.dir = fs::absolute(dir);
  m.output_root = m.dir;
  for (int c = 0; c < a.cases; ++c) {
    const std::uint64_t seed = g.seed + static_cast<std::uint64_t>(c);
    auto cfg = a.randomized ? lnl::phantom::PhantomConfig::randomized(schema, seed)
                            : lnl::phantom::PhantomConfig::make_default(schema, seed);
    if (a.slab_scale > 1) {
      for (auto& s : cfg.slabs) {
        s.k_begin *= a.slab_scale;
        s.height *= a.slab_scale;
      }
      cfg.dims[2] *= a.slab_scale;
    }
    const auto p = lnl::phantom::generate_phantom(cfg, schema);
    char id[32];
    std::snprintf(id, sizeof id, "case%03d", c + 1);
    lnl::cli::ManifestCase mc;
    mc.id = id;
    mc.image = m.dir / (mc.id + "_image.nii.gz");
    lnl::nifti::write(p.image, mc.image);
    mc.labels["reference"] = m.dir / (mc.id + "_reference.nii.gz");
    mc.set_order.push_back("reference");
    lnl::nifti::write(p.labels, mc.labels["reference"]);
    json prov = json::parse(cfg.to_json());
    if (a.jitter > 0) {
      const std::uint64_t jseed = seed ^ 0x9e3779b97f4a7c15ULL;
      const auto j = lnl::phantom::perturb_boundary_jitter(p.labels, schema, a.jitter, jseed);
      mc.labels["jittered"] = m.dir / (mc.id + "_jittered.nii.gz");
      mc.set_order.push_back("jittered");
      lnl::nifti::write(j, mc.labels["jittered"]);
      prov["jitter"] = {{"max_shift_slices", a.jitter}, {"seed", jseed}};
    }
    prov["schema_id"] = schema.schema_id;
    write_text(m.dir / (mc.id + "_provenance.json"), prov.dump(2) + "\n");
    m.cases.push_back(std::move(mc));
  }
  write_text(m.dir / "manifest.json", lnl::cli::manifest_to_json(m));
  std::cout << "wrote " << a.cases << " phantom case(s) and manifest.json to " << dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------------------
// review-plan / serve

struct PlanArgs {
  std::string manifest, output;
  std::vector<std::string> sets;
  int raters = 3;
};

int cmd_review_plan(const Globals& g, const PlanArgs& a) {
  if (a.raters < 1) throw lnl::DomainError("--raters must be >= 1");
  const auto m = lnl::cli::load_manifest(a.manifest);
  const auto schema = m.schema && g.schema_path.empty() ? lnl::load_schema(*m.schema) : g.schema();
  const auto sets = a.sets.empty() ? m.set_names() : a.sets;
  const fs::path out = fs::absolute(a.output);
  const fs::path root = out.parent_path();

  std::vector<lnl::review::ReviewCase> cases;
  for (const auto& mc : m.cases) {
    if (mc.image.empty()) throw lnl::DomainError("case '" + mc.id + "' has no image");
    lnl::review::ReviewCase rc{mc.id, mc.image.lexically_relative(root).generic_string(), {}};
    for (const auto& [set, p] : mc.labels) rc.sets[set] = p.lexically_relative(root).generic_string();
    cases.push_back(std::move(rc));
  }
  const auto plan =
      lnl::review::create_plan(cases, sets, lnl::review::default_rater_ids(static_cast<std::size_t>(a.raters)),
                               g.seed, schema, root);
  fs::create_directories(root);
  plan.save(out);
  std::cout << plan.raters.size() << " raters x " << plan.cases.size() << " cases x " << plan.sets.size()
            << " contour sets: " << plan.assignments_per_rater() << " assignments per rater, "
            << plan.expected_ratings() << " expected ratings (" << plan.levels.size() << " levels each)\n";
  for (const auto& r : plan.raters) std::cout << "  " << r.id << " session key " << r.session_key << "\n";
  std::cout << "  admin key " << plan.admin_key << "\nwrote " << out.string() << "\n";
  return kOk;
}

struct ServeArgs {
  std::string plan, log, data_root, host = "127.0.0.1";
  int port = 8080;
};

lnl::review::ReviewServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Globals& g, const ServeArgs& a) {
  const auto plan = lnl::review::ReviewPlan::load(a.plan);
  auto schema = g.schema();
  if (g.schema_path.empty() && plan.schema_id != schema.schema_id) {
    throw lnl::ValidationError("plan uses schema '" + plan.schema_id + "'; pass it with --schema");
  }
  fs::path root = a.data_root;
  if (root.empty()) {
    if (const char* env = std::getenv("LNL_DATA_ROOT")) root = env;
  }
  if (root.empty()) root = fs::absolute(a.plan).parent_path();
  const fs::path log = a.log.empty() ? fs::path(a.plan + ".ratings.jsonl") : fs::path(a.log);

  lnl::review::ReviewService service(plan, std::move(schema), log, root);
  lnl::review::ReviewServer server(service);
  int port = 0;
  try {
    port = server.bind(a.host, a.port);
  } catch (const lnl::IoError& e) {
    std::cerr << "lnl serve: " << e.what() << "\n";
    return kInternal;
  }
  std::cout << "serving " << plan.raters.size() << " raters on http://" << a.host << ":" << port
            << " (ratings log " << log.string() << ")" << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen_after_bind();
  g_server = nullptr;
  return kOk;
}

template <typename F>
int guarded(const char* name, F&& f) {
  try {
    return f();
  } catch (const lnl::ParseError& e) {
    std::cerr << "lnl " << name << ": " << e.what() << "\n";
  } catch (const lnl::IoError& e) {
    std::cerr << "lnl " << name << ": " << e.what() << "\n";
  } catch (const lnl::Error& e) {
    std::cerr << "lnl " << name << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "lnl " << name << ": internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInput;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lymph node level toolkit: preprocessing, slice-plane postprocessing, evaluation, statistics, "
               "phantoms and blinded review."};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--schema", g.schema_path, "Level schema JSON (default: built-in 20-level schema)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for phantoms and review plans")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for evaluate")->capture_default_str();

  PreprocessArgs pre;
  auto* sp = app.add_subcommand("preprocess", "Crop, Otsu-mask and write a CT volume");
  sp->footer(
      "The crop box is chosen by the operator from anatomical landmarks: the frontal skull base\n"
      "bounds it superiorly, the carina inferiorly, and the surface of the CT table posteriorly.\n"
      "Masking defaults: otsuPercentileThreshold 0.01, thresholdCorrectionFactor 0.3,\n"
      "closingSize 9, ROIAutoDilateSize 2.");
  sp->add_option("--input", pre.input, "Input CT NIfTI")->required();
  sp->add_option("--output", pre.output, "Output NIfTI")->required();
  sp->add_option("--mask-output", pre.mask_output, "Optional output for the foreground mask");
  sp->add_option("--crop", pre.crop, "Voxel box i0,j0,k0,i1,j1,k1 (half-open)")->delimiter(',')->expected(6);
  sp->add_option("--percentile", pre.params.percentile_clip, "Clipping quantile (otsuPercentileThreshold)")
      ->capture_default_str();
  sp->add_option("--correction", pre.params.threshold_correction, "Threshold correction (thresholdCorrectionFactor)")
      ->capture_default_str();
  sp->add_option("--closing", pre.params.closing_size_voxels, "Closing cube edge in voxels (closingSize)")
      ->capture_default_str();
  sp->add_option("--dilate", pre.params.dilate_size_voxels, "Final dilation in voxels (ROIAutoDilateSize)")
      ->capture_default_str();

  PostprocessArgs post;
  auto* pp = app.add_subcommand("postprocess", "Slice-plane adjustment of a level label volume");
  pp->add_option("--input", post.input, "Input label NIfTI")->required();
  pp->add_option("--output", post.output, "Output label NIfTI")->required();
  pp->add_option("--report", post.report, "Adjustment report JSON");
  pp->add_option("--min-voxels", post.cfg.min_foreground_voxels, "Clear slices with at most this many voxels")
      ->capture_default_str();
  pp->add_option("--drop-fraction", post.cfg.drop_fraction, "Relative drop that clears a slice before an empty one")
      ->capture_default_str();
  pp->add_flag("--largest-component", post.components, "Keep only the largest component of each level");
  pp->add_option("--component-levels", post.component_levels, "Restrict --largest-component to these level names")
      ->delimiter(',');
  pp->add_option("--order", post.order, "components-first or adjust-first")
      ->check(CLI::IsMember({"components-first", "adjust-first"}))
      ->capture_default_str();

  EvaluateArgs ev;
  auto* ep = app.add_subcommand("evaluate", "Volumetric Dice, surface Dice and Hausdorff against a reference set");
  ep->add_option("--manifest", ev.manifest, "Pipeline manifest JSON")->required();
  ep->add_option("--reference", ev.reference, "Reference contour-set name")->required();
  ep->add_option("--tolerance", ev.tolerance, "Surface Dice tolerance in mm (default: largest voxel spacing)");
  ep->add_option("--sets", ev.sets, "Sets to evaluate (default: all but the reference)")->delimiter(',');
  ep->add_option("--output", ev.output, "Long-format CSV")->required();

  StatsArgs st;
  auto* tp = app.add_subcommand("stats", "Paired tests on CSV columns, rating exports or metric tables");
  tp->add_option("--test", st.test, "signed-rank, rank-sum or levene")->capture_default_str();
  tp->add_option("--csv", st.csv, "CSV with paired columns named by --x/--y");
  tp->add_option("--ratings", st.ratings, "Unblinded rating export; --x/--y name contour sets");
  tp->add_option("--metrics", st.metrics, "evaluate CSV; --x/--y name contour sets");
  tp->add_option("--x", st.x, "First column or contour set");
  tp->add_option("--y", st.y, "Second column or contour set");
  tp->add_option("--metric", st.metric, "Metric column for --metrics")->capture_default_str();
  tp->add_option("--level", st.level, "Level row for --metrics")->capture_default_str();
  tp->add_option("--mode", st.mode, "auto, exact or approx")->capture_default_str();

  PhantomArgs ph;
  auto* hp = app.add_subcommand("phantom", "Write synthetic phantom cases and a manifest");
  hp->add_option("--output-dir", ph.output_dir, "Output directory")->required();
  hp->add_option("--cases", ph.cases, "Number of cases (seeds --seed, --seed+1, ...)")->capture_default_str();
  hp->add_option("--jitter", ph.jitter, "Max boundary shift in slices for the 'jittered' set (0: none)")
      ->capture_default_str();
  hp->add_option("--slab-scale", ph.slab_scale, "Multiply slab heights and slice count")->capture_default_str();
  hp->add_flag("--randomized", ph.randomized, "Random geometry instead of the default layout");

  PlanArgs pl;
  auto* rp = app.add_subcommand("review-plan", "Build a blinded review plan from a manifest");
  rp->add_option("--manifest", pl.manifest, "Pipeline manifest JSON")->required();
  rp->add_option("--output", pl.output, "Plan JSON (server-side only)")->required();
  rp->add_option("--sets", pl.sets, "Contour sets to review (default: all)")->delimiter(',');
  rp->add_option("--raters", pl.raters, "Number of raters")->capture_default_str();

  ServeArgs sv;
  auto* vp = app.add_subcommand("serve", "Serve the review HTTP API");
  vp->add_option("--plan", sv.plan, "Plan JSON")->required();
  vp->add_option("--port", sv.port, "TCP port (0: any free port)")->capture_default_str();
  vp->add_option("--host", sv.host, "Bind address")->capture_default_str();
  vp->add_option("--log", sv.log, "Rating log (default: <plan>.ratings.jsonl)");
  vp->add_option("--data-root", sv.data_root, "Root for relative volume paths (default: $LNL_DATA_ROOT, then the plan's directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInput;
  }

  if (sp->parsed()) return guarded("preprocess", [&] { return cmd_preprocess(pre); });
  if (pp->parsed()) return guarded("postprocess", [&] { return cmd_postprocess(g, post); });
  if (ep->parsed()) return guarded("evaluate", [&] { return cmd_evaluate(g, ev); });
  if (tp->parsed()) return guarded("stats", [&] { return cmd_stats(st); });
  if (hp->parsed()) return guarded("phantom", [&] { return cmd_phantom(g, ph); });
  if (rp->parsed()) return guarded("review-plan", [&] { return cmd_review_plan(g, pl); });
  if (vp->parsed()) return guarded("serve", [&] { return cmd_serve(g, sv); });
  return kInput;
}

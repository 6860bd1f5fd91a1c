#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lnl/review.hpp"
#include "lnl/stats.hpp"
#include "test_support.hpp"

using namespace lnl;
using namespace lnl::review;
using lnl::testing::TempDir;

namespace {

const std::vector<std::string> kSets{"expert_reference", "deep_learning_model", "intraobserver_repeat"};

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("plan arithmetic, determinism and per-rater permutations") {
  TempDir dir;
  const auto s = default_schema();
  const auto cases = lnl::testing::make_study(dir.path(), 4, kSets, s);
  const auto plan = create_plan(cases, kSets, default_rater_ids(3), 7, s, dir.path());
  CHECK(plan.assignments_per_rater() == 12);
  CHECK(plan.expected_ratings() == 3 * 12 * 20);
  std::set<std::string> tokens;
  for (const auto& r : plan.raters) {
    std::set<std::pair<std::size_t, std::string>> pairs;
    for (const auto& a : r.sequence) {
      pairs.insert({a.case_index, a.set});
      tokens.insert(a.token);
    }
    CHECK(pairs.size() == 12);
  }
  CHECK(tokens.size() == 36);

  const auto again = create_plan(cases, kSets, default_rater_ids(3), 7, s, dir.path());
  CHECK(again.to_json() == plan.to_json());
  const auto other = create_plan(cases, kSets, default_rater_ids(3), 8, s, dir.path());
  auto order = [](const RaterPlan& r) {
    std::vector<std::pair<std::size_t, std::string>> o;
    for (const auto& a : r.sequence) o.emplace_back(a.case_index, a.set);
    return o;
  };
  CHECK(order(other.raters[0]) != order(plan.raters[0]));
  CHECK(order(plan.raters[0]) != order(plan.raters[1]));
  // A rater's order depends on (seed, rater id) only.
  const auto solo = create_plan(cases, kSets, {"rater2"}, 7, s, dir.path());
  CHECK(order(solo.raters[0]) == order(plan.raters[1]));

  CHECK(ReviewPlan::from_json(plan.to_json()).to_json() == plan.to_json());
}

TEST_CASE("single assignment plan") {
  TempDir dir;
  auto s = default_schema();
  s.levels.resize(1);
  s.exclusion_groups.clear();
  const auto cases = lnl::testing::make_study(dir.path(), 1, {"a"}, default_schema());
  const auto plan = create_plan(cases, {"a"}, {"r"}, 0, s, dir.path());
  CHECK(plan.raters.at(0).sequence.size() == 1);
  CHECK(plan.expected_ratings() == 1);
}

TEST_CASE("plan build errors name the case") {
  TempDir dir;
  const auto s = default_schema();
  auto cases = lnl::testing::make_study(dir.path(), 2, kSets, s);
  std::filesystem::remove(dir.path() / cases[1].sets.at(kSets[2]));
  try {
    create_plan(cases, kSets, {"r"}, 0, s, dir.path());
    FAIL("accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("case02") != std::string::npos);
  }
  cases[0].sets.erase(kSets[1]);
  CHECK_THROWS_WITH_AS(create_plan(cases, kSets, {"r"}, 0, s, dir.path()),
                       doctest::Contains("case01"), ValidationError);
}

TEST_CASE("rating categories follow the four anchors") {
  CHECK(rating_category(0) == "complete recontouring of segmentation necessary");
  CHECK(rating_category(25) == "complete recontouring of segmentation necessary");
  CHECK(rating_category(25.5) == "major manual editing necessary");
  CHECK(rating_category(50) == "major manual editing necessary");
  CHECK(rating_category(75) == "minor manual editing necessary");
  CHECK(rating_category(80.7) == "segmentation clinically usable");
}

TEST_CASE("window/level mapping") {
  CHECK(window_level(-160, 40, 400) == 0);
  CHECK(window_level(240, 40, 400) == 255);
  CHECK(window_level(40, 40, 400) == 128);
  CHECK(window_level(-1000, 40, 400) == 0);
  CHECK(window_level(3000, 40, 400) == 255);
}

TEST_CASE("rendered rectangle has its outline exactly at the mask boundary") {
  const auto g = lnl::testing::grid({12, 10, 3});
  ImageVolume img(g, 40.0f);
  LabelVolume lab(g);
  for (std::int64_t j = 2; j < 7; ++j)
    for (std::int64_t i = 3; i < 9; ++i) lab.at(i, j, 1) = 5;
  const auto color = level_color(5);
  const auto r = render_raster(img, lab, Plane::axial, 1, 40, 400);
  CHECK(r.width == 12);
  CHECK(r.height == 10);
  for (std::int64_t y = 0; y < 10; ++y)
    for (std::int64_t x = 0; x < 12; ++x) {
      const bool inside = x >= 3 && x < 9 && y >= 2 && y < 7;
      const bool edge = inside && (x == 3 || x == 8 || y == 2 || y == 6);
      const auto px = r.pixel(x, y);
      if (edge) {
        CHECK(px == color);
      } else {
        CHECK(px == std::array<std::uint8_t, 3>{128, 128, 128});
      }
    }
  // Label-free slice renders pure grayscale.
  const auto empty = render_raster(img, lab, Plane::axial, 0, 40, 400);
  for (std::size_t n = 0; n < empty.rgb.size(); ++n) CHECK(empty.rgb[n] == 128);
  // PNG round trip.
  const auto png = encode_png(r);
  const auto back = lnl::testing::decode_png(std::string(png.begin(), png.end()));
  CHECK(back.rgb == r.rgb);
}

TEST_CASE("coronal and sagittal planes put superior at the top") {
  const auto g = lnl::testing::grid({4, 5, 6});
  ImageVolume img(g, -1000.0f);
  for (std::int64_t j = 0; j < 5; ++j)
    for (std::int64_t i = 0; i < 4; ++i) img.at(i, j, 5) = 1000.0f;
  LabelVolume lab(g);
  const auto cor = render_raster(img, lab, Plane::coronal, 2, 40, 400);
  CHECK(cor.width == 4);
  CHECK(cor.height == 6);
  CHECK(cor.pixel(0, 0)[0] == 255);
  CHECK(cor.pixel(0, 5)[0] == 0);
  const auto sag = render_raster(img, lab, Plane::sagittal, 1, 40, 400);
  CHECK(sag.width == 5);
  CHECK(sag.pixel(4, 0)[0] == 255);
  CHECK_THROWS_AS(render_raster(img, lab, Plane::sagittal, 4, 40, 400), DomainError);
  CHECK_THROWS_AS(render_raster(img, lab, Plane::axial, -1, 40, 400), DomainError);
}

TEST_CASE("service flow: next assignment, validation, supersession and replay") {
  TempDir dir;
  const auto s = default_schema();
  const auto cases = lnl::testing::make_study(dir.path(), 2, kSets, s);
  const auto plan = create_plan(cases, kSets, default_rater_ids(2), 3, s, dir.path());
  const auto log = dir / "ratings.jsonl";
  const auto& r1 = plan.raters[0];
  const auto& r2 = plan.raters[1];
  {
    ReviewService svc(plan, s, log, dir.path());
    auto next = nlohmann::json::parse(svc.next_assignment_json(r1.session_key));
    CHECK(next["token"] == r1.sequence[0].token);
    CHECK(next["position"] == 1);
    CHECK(next["levels"].size() == 20);
    CHECK_THROWS_AS(svc.next_assignment_json("nope"), RangeError);

    CHECK_THROWS_AS(svc.submit_rating(r1.session_key, r1.sequence[0].token, 1, 101, 0), DomainError);
    CHECK_THROWS_AS(svc.submit_rating(r1.session_key, r1.sequence[0].token, 1, -0.5, 0), DomainError);
    CHECK_THROWS_AS(svc.submit_rating(r1.session_key, r1.sequence[0].token, 21, 50, 0), DomainError);
    CHECK_THROWS_AS(svc.submit_rating(r1.session_key, r2.sequence[0].token, 1, 50, 0), RangeError);
    CHECK_THROWS_AS(svc.submit_rating(r1.session_key, "bogus", 1, 50, 0), RangeError);
    CHECK(svc.history().empty());
    CHECK_FALSE(std::filesystem::exists(log));

    // Partial rating keeps the assignment current.
    for (int l = 1; l <= 19; ++l) svc.submit_rating(r1.session_key, r1.sequence[0].token, l, 60, 12.5);
    CHECK(nlohmann::json::parse(svc.next_assignment_json(r1.session_key))["token"] == r1.sequence[0].token);
    svc.submit_rating(r1.session_key, r1.sequence[0].token, 20, 80.7, 12.5);
    next = nlohmann::json::parse(svc.next_assignment_json(r1.session_key));
    CHECK(next["token"] == r1.sequence[1].token);
    CHECK(next["position"] == 2);

    // Resubmission supersedes but history keeps both.
    svc.submit_rating(r1.session_key, r1.sequence[0].token, 20, 80.7, 12.5);
    svc.submit_rating(r1.session_key, r1.sequence[0].token, 1, 30, 12.5);
    CHECK(svc.history().size() == 22);
    CHECK(svc.effective_ratings().size() == 20);
    const auto p = svc.progress(r1.session_key);
    CHECK(p.assignments_done == 1);
    CHECK(p.ratings_done == 20);
    CHECK(p.ratings_total == 6 * 20);
  }
  {
    // Restart: the log replays to the same state.
    ReviewService svc(plan, s, log, dir.path());
    CHECK(svc.history().size() == 22);
    CHECK(svc.effective_ratings().size() == 20);
    CHECK(nlohmann::json::parse(svc.next_assignment_json(r1.session_key))["token"] == r1.sequence[1].token);
    const auto rows = read_csv(svc.export_csv(true));
    REQUIRE(rows.size() == 21);
    CHECK(rows[0][0] == "rater");
    const auto& first = rows[1];
    CHECK(first[0] == "rater1");
    CHECK(first[2] == r1.sequence[0].set);
    CHECK(first[5] == "30");
    CHECK(first[6] == "major manual editing necessary");
    const auto& last = rows[20];
    CHECK(last[5] == "80.7");
    CHECK(last[6] == "segmentation clinically usable");
    const auto blind = read_csv(svc.export_csv(false));
    CHECK(blind[1][2] == r1.sequence[0].token);
  }
  {
    // A torn trailing line (crash mid-append) is ignored.
    std::ofstream(log, std::ios::app) << "{\"rater\":\"rater1\",\"tok";
    ReviewService svc(plan, s, log, dir.path());
    CHECK(svc.history().size() == 22);
  }
}

TEST_CASE("mismatched schema is rejected") {
  TempDir dir;
  const auto s = default_schema();
  const auto cases = lnl::testing::make_study(dir.path(), 1, {"a"}, s);
  const auto plan = create_plan(cases, {"a"}, {"r"}, 0, s, dir.path());
  auto other = s;
  other.schema_id = "other";
  CHECK_THROWS_AS(ReviewService(plan, other, dir / "log.jsonl", dir.path()), ValidationError);
}

TEST_CASE("exported synthetic ratings reproduce a precomputed signed-rank result") {
  // Scores on a quarter-point grid so they survive CSV formatting exactly. Reference
  // p computed once with scipy.stats.wilcoxon(method="exact") on the per-case means.
  TempDir dir;
  const auto s = default_schema();
  const std::vector<std::string> sets{"set_a", "set_b"};
  const auto cases = lnl::testing::make_study(dir.path(), 20, sets, s);
  const auto plan = create_plan(cases, sets, default_rater_ids(3), 5, s, dir.path());
  ReviewService svc(plan, s, dir / "log.jsonl", dir.path());
  auto score = [](int r, int c, int set, int l) {
    double v = ((r * 31 + c * 17 + set * 53 + l * 7) % 41) * 0.5 + 60;
    if (set == 1) v += (c % 7) * 0.25 - 1.0 + ((c * c) % 3 == 0 ? 0.25 : 0.0);
    return v;
  };
  for (std::size_t r = 0; r < plan.raters.size(); ++r) {
    for (const auto& a : plan.raters[r].sequence) {
      const int set = a.set == "set_a" ? 0 : 1;
      for (int l = 1; l <= 20; ++l) {
        svc.submit_rating(plan.raters[r].session_key, a.token, l,
                          score(static_cast<int>(r), static_cast<int>(a.case_index), set, l), 1.0);
      }
    }
  }
  const auto rows = read_csv(svc.export_csv(true));
  CHECK(rows.size() == 1 + 3 * 20 * 2 * 20);
  // Sum per (case, set) in export order: rater-major, then level.
  std::map<std::pair<std::string, std::string>, double> sum;
  for (std::size_t n = 1; n < rows.size(); ++n) sum[{rows[n][1], rows[n][2]}] += std::stod(rows[n][5]);
  stats::PairedSample ps;
  for (const auto& c : plan.cases) {
    ps.x.push_back(sum[{c.id, "set_a"}] / 60.0);
    ps.y.push_back(sum[{c.id, "set_b"}] / 60.0);
  }
  const auto t = stats::wilcoxon_signed_rank(ps);
  CHECK(t.p_value == doctest::Approx(0.1893482208251953).epsilon(1e-12));
}

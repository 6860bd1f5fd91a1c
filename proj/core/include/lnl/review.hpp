#pragma once

// Blinded expert-rating backend: plans, slice rendering, the rating log and export.
//
// Raters see opaque assignment tokens only. The token -> (case, contour set) mapping
// lives in the plan file, which is read by the server and never sent to raters.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "lnl/schema.hpp"
#include "lnl/volume.hpp"

namespace lnl::review {

struct ReviewCase {
  std::string id;
  std::string image;                        // path, relative paths resolve against the data root
  std::map<std::string, std::string> sets;  // contour-set name -> label path
};

struct Assignment {
  std::string token;
  std::size_t case_index = 0;
  std::string set;
};

struct RaterPlan {
  std::string id;           // appears in exports only
  std::string session_key;  // bearer key used by the rater's client
  std::vector<Assignment> sequence;
};

struct ReviewPlan {
  std::uint64_t seed = 0;
  std::string schema_id;
  std::vector<LevelId> levels;  // rated per assignment
  std::vector<ReviewCase> cases;
  std::vector<std::string> sets;
  std::vector<RaterPlan> raters;
  std::string admin_key;

  std::size_t assignments_per_rater() const noexcept { return cases.size() * sets.size(); }
  std::size_t expected_ratings() const noexcept {
    return raters.size() * assignments_per_rater() * levels.size();
  }

  const RaterPlan* rater_by_key(std::string_view session_key) const noexcept;
  const RaterPlan* rater_by_id(std::string_view id) const noexcept;
  /// Owning rater and assignment of a token, or {nullptr, nullptr}.
  std::pair<const RaterPlan*, const Assignment*> lookup(std::string_view token) const noexcept;

  std::string to_json() const;
  static ReviewPlan from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ReviewPlan load(const std::filesystem::path& path);
};

/// Builds a plan over every (case, contour set) pair for each rater. The presentation
/// order of a rater is a Fisher-Yates shuffle seeded from (seed, rater id); tokens are
/// drawn after shuffling, so they carry nothing but sequence position.
///
/// Throws ValidationError when a case lacks one of `sets`, or when a referenced file does
/// not exist below `data_root` (the message names the case).
ReviewPlan create_plan(const std::vector<ReviewCase>& cases, const std::vector<std::string>& sets,
                       const std::vector<std::string>& rater_ids, std::uint64_t seed, const LevelSchema& schema,
                       const std::filesystem::path& data_root = {});

/// Rater ids "rater1", "rater2", ...
std::vector<std::string> default_rater_ids(std::size_t n);

/// 0-25, 25-50, 50-75 and above 75 map to the four rating anchors.
std::string_view rating_category(double score);

enum class Plane { axial, coronal, sagittal };
Plane plane_from_string(std::string_view s);
std::string_view to_string(Plane p) noexcept;

struct RenderRequest {
  std::string token;
  Plane plane = Plane::axial;
  std::int64_t index = 0;
  double window_center = 40.0;
  double window_width = 400.0;
};

struct Raster {
  std::int64_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  std::array<std::uint8_t, 3> pixel(std::int64_t x, std::int64_t y) const {
    const auto o = static_cast<std::size_t>((y * width + x) * 3);
    return {rgb[o], rgb[o + 1], rgb[o + 2]};
  }
};

/// 8-bit gray for an HU value: (v - (c - w/2)) / w * 255, clamped to [0, 255].
std::uint8_t window_level(double hu, double center, double width) noexcept;

/// Number of slices and the in-plane size (width, height) for a plane.
struct PlaneExtent {
  std::int64_t slices = 0, width = 0, height = 0;
};
PlaneExtent plane_extent(const VoxelGrid& grid, Plane plane) noexcept;

/// Slice raster. Axial: x = i, y = j. Coronal: x = i, y = k flipped so superior is up.
/// Sagittal: x = j, y = k flipped likewise. Pixels of a level whose 4-neighborhood in the
/// slice leaves the level are drawn in level_color; everything else is windowed CT.
Raster render_raster(const ImageVolume& image, const LabelVolume& labels, Plane plane, std::int64_t index,
                     double center, double width);

std::vector<std::uint8_t> encode_png(const Raster& r);

struct RatingRecord {
  std::string rater;  // rater id (not the session key)
  std::string token;
  LevelId level = 0;
  double score = 0.0;
  std::string submitted_at;  // UTC, ISO 8601
  double time_on_case_s = 0.0;
};

struct Progress {
  std::size_t assignments_done = 0;
  std::size_t assignments_total = 0;
  std::size_t ratings_done = 0;
  std::size_t ratings_total = 0;
};

/// Holds the plan, lazily loaded volumes and the rating log. Methods are thread-safe.
class ReviewService {
 public:
  /// Replays `log_path` if present. Relative volume paths resolve against `data_root`.
  ReviewService(ReviewPlan plan, LevelSchema schema, std::filesystem::path log_path,
                std::filesystem::path data_root = {});

  const ReviewPlan& plan() const noexcept { return plan_; }
  const LevelSchema& schema() const noexcept { return schema_; }

  /// Blinded JSON for the rater's earliest incompletely rated assignment, or a completion
  /// object {"complete": true, ...}. Throws RangeError for an unknown session key.
  std::string next_assignment_json(std::string_view session_key) const;
  std::string progress_json(std::string_view session_key) const;
  Progress progress(std::string_view session_key) const;
  /// Level ids and display colors.
  std::string palette_json() const;

  /// Throws RangeError for an unknown token, DomainError for a bad plane or index.
  std::vector<std::uint8_t> render_png(const RenderRequest& req) const;
  Raster render(const RenderRequest& req) const;

  /// Validates and appends. Throws RangeError (unknown key/token, token of another
  /// rater) or DomainError (score outside [0, 100], level outside the plan).
  RatingRecord submit_rating(std::string_view session_key, std::string_view token, int level, double score,
                             double time_on_case_s);

  /// Every appended record in log order.
  std::vector<RatingRecord> history() const;
  /// Latest record per (rater, token, level).
  std::vector<RatingRecord> effective_ratings() const;

  /// CSV: rater,case,contour_set,level,level_name,score,category,submitted_at,time_on_case_s.
  /// With unblind=false the contour_set column holds the assignment token.
  std::string export_csv(bool unblind) const;

 private:
  struct Loaded {
    std::shared_ptr<const ImageVolume> image;
    std::shared_ptr<const LabelVolume> labels;
  };
  Loaded volumes(const Assignment& a) const;
  void apply(const RatingRecord& r);
  std::filesystem::path resolve(const std::string& p) const;

  ReviewPlan plan_;
  LevelSchema schema_;
  std::filesystem::path log_path_;
  std::filesystem::path data_root_;

  mutable std::mutex log_mutex_;
  std::vector<RatingRecord> history_;
  // (rater, token, level) -> index into history_
  std::map<std::tuple<std::string, std::string, LevelId>, std::size_t> effective_;

  mutable std::mutex cache_mutex_;
  mutable std::map<std::string, std::shared_ptr<const ImageVolume>> images_;
  mutable std::map<std::string, std::shared_ptr<const LabelVolume>> labels_;
};

/// HTTP front end:
///   GET  /session/:key/next   blinded next assignment
///   GET  /progress/:key
///   GET  /palette
///   GET  /render?token&plane&index&wc&ww   image/png
///   POST /rating  {"rater": key, "token", "level", "score", "time_on_case_s"}
///   GET  /export?unblind=0|1  requires "Authorization: Bearer <admin key>"
class ReviewServer {
 public:
  explicit ReviewServer(ReviewService& service);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds; returns the bound port or throws IoError. Port 0 picks a free port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen_after_bind();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lnl::review

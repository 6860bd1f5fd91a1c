#include "lnl/review.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>
#include <png.h>

#include "lnl/errors.hpp"
#include "lnl/nifti.hpp"

namespace lnl::review {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::uint64_t seed, std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (int b = 0; b < 8; ++b) mix(static_cast<unsigned char>(seed >> (8 * b)));
  mix(0);
  for (char c : text) mix(static_cast<unsigned char>(c));
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string color_hex(LevelId id) {
  const auto c = level_color(id);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

std::string fmt_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json record_json(const RatingRecord& r) {
  return {{"rater", r.rater},          {"token", r.token},
          {"level", r.level},          {"score", r.score},
          {"submitted_at", r.submitted_at}, {"time_on_case_s", r.time_on_case_s}};
}

}  // namespace

// ---------------------------------------------------------------------------------------
// Plan

const RaterPlan* ReviewPlan::rater_by_key(std::string_view session_key) const noexcept {
  for (const auto& r : raters) {
    if (r.session_key == session_key) return &r;
  }
  return nullptr;
}

const RaterPlan* ReviewPlan::rater_by_id(std::string_view id) const noexcept {
  for (const auto& r : raters) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::pair<const RaterPlan*, const Assignment*> ReviewPlan::lookup(std::string_view token) const noexcept {
  for (const auto& r : raters) {
    for (const auto& a : r.sequence) {
      if (a.token == token) return {&r, &a};
    }
  }
  return {nullptr, nullptr};
}

std::string ReviewPlan::to_json() const {
  json j;
  j["format"] = "lnl-review-plan";
  j["seed"] = seed;
  j["schema_id"] = schema_id;
  j["levels"] = levels;
  j["sets"] = sets;
  j["admin_key"] = admin_key;
  j["cases"] = json::array();
  for (const auto& c : cases) j["cases"].push_back({{"id", c.id}, {"image", c.image}, {"sets", c.sets}});
  j["raters"] = json::array();
  for (const auto& r : raters) {
    json seq = json::array();
    for (const auto& a : r.sequence) seq.push_back({{"token", a.token}, {"case", a.case_index}, {"set", a.set}});
    j["raters"].push_back({{"id", r.id}, {"session_key", r.session_key}, {"sequence", seq}});
  }
  return j.dump(1) + "\n";
}

ReviewPlan ReviewPlan::from_json(std::string_view text) {
  ReviewPlan p;
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "lnl-review-plan") throw ParseError("format", "not a review plan");
    p.seed = j.at("seed").get<std::uint64_t>();
    p.schema_id = j.at("schema_id").get<std::string>();
    p.levels = j.at("levels").get<std::vector<LevelId>>();
    p.sets = j.at("sets").get<std::vector<std::string>>();
    p.admin_key = j.at("admin_key").get<std::string>();
    for (const auto& c : j.at("cases")) {
      p.cases.push_back({c.at("id").get<std::string>(), c.at("image").get<std::string>(),
                         c.at("sets").get<std::map<std::string, std::string>>()});
    }
    for (const auto& r : j.at("raters")) {
      RaterPlan rp{r.at("id").get<std::string>(), r.at("session_key").get<std::string>(), {}};
      for (const auto& a : r.at("sequence")) {
        rp.sequence.push_back(
            {a.at("token").get<std::string>(), a.at("case").get<std::size_t>(), a.at("set").get<std::string>()});
      }
      p.raters.push_back(std::move(rp));
    }
  } catch (const json::exception& e) {
    throw ParseError("plan", std::string("malformed review plan: ") + e.what());
  }
  for (const auto& r : p.raters) {
    for (const auto& a : r.sequence) {
      if (a.case_index >= p.cases.size()) throw ParseError("plan", "assignment references a missing case");
    }
  }
  return p;
}

void ReviewPlan::save(const std::filesystem::path& path) const {
  const auto text = to_json();
  nifti::write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

ReviewPlan ReviewPlan::load(const std::filesystem::path& path) {
  const auto bytes = nifti::read_file_bytes(path);
  return from_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<std::string> default_rater_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t r = 1; r <= n; ++r) ids.push_back("rater" + std::to_string(r));
  return ids;
}

ReviewPlan create_plan(const std::vector<ReviewCase>& cases, const std::vector<std::string>& sets,
                       const std::vector<std::string>& rater_ids, std::uint64_t seed, const LevelSchema& schema,
                       const std::filesystem::path& data_root) {
  if (cases.empty() || sets.empty() || rater_ids.empty()) {
    throw ValidationError("a review plan needs at least one case, contour set and rater");
  }
  if (std::set<std::string>(rater_ids.begin(), rater_ids.end()).size() != rater_ids.size()) {
    throw ValidationError("duplicate rater id");
  }
  if (std::set<std::string>(sets.begin(), sets.end()).size() != sets.size()) {
    throw ValidationError("duplicate contour-set name");
  }
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return (path.is_relative() && !data_root.empty()) ? data_root / path : path;
  };
  std::set<std::string> seen;
  for (const auto& c : cases) {
    if (!seen.insert(c.id).second) throw ValidationError("duplicate case id '" + c.id + "'");
    if (!std::filesystem::exists(resolve(c.image))) {
      throw ValidationError("case '" + c.id + "': image file not found: " + c.image);
    }
    for (const auto& s : sets) {
      const auto it = c.sets.find(s);
      if (it == c.sets.end()) throw ValidationError("case '" + c.id + "': contour set '" + s + "' missing");
      if (!std::filesystem::exists(resolve(it->second))) {
        throw ValidationError("case '" + c.id + "': contour set '" + s + "' file not found: " + it->second);
      }
    }
  }

  ReviewPlan plan;
  plan.seed = seed;
  plan.schema_id = schema.schema_id;
  for (const auto& l : schema.levels) plan.levels.push_back(l.id);
  plan.cases = cases;
  plan.sets = sets;

  std::set<std::string> used;
  auto fresh = [&](std::mt19937_64& rng, int words) {
    for (;;) {
      std::string s;
      for (int w = 0; w < words; ++w) s += hex64(rng());
      if (used.insert(s).second) return s;
    }
  };
  std::mt19937_64 admin_rng(fnv1a(seed, "\x01" "admin"));
  plan.admin_key = fresh(admin_rng, 2);

  for (const auto& id : rater_ids) {
    std::mt19937_64 rng(fnv1a(seed, id));
    RaterPlan rp;
    rp.id = id;
    rp.session_key = fresh(rng, 2);
    for (std::size_t c = 0; c < cases.size(); ++c) {
      for (const auto& s : sets) rp.sequence.push_back({{}, c, s});
    }
    for (std::size_t i = rp.sequence.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng() % i);
      std::swap(rp.sequence[i - 1], rp.sequence[j]);
    }
    for (auto& a : rp.sequence) a.token = fresh(rng, 1);
    plan.raters.push_back(std::move(rp));
  }
  return plan;
}

std::string_view rating_category(double score) {
  if (score <= 25.0) return "complete recontouring of segmentation necessary";
  if (score <= 50.0) return "major manual editing necessary";
  if (score <= 75.0) return "minor manual editing necessary";
  return "segmentation clinically usable";
}

// ---------------------------------------------------------------------------------------
// Rendering

Plane plane_from_string(std::string_view s) {
  if (s == "axial") return Plane::axial;
  if (s == "coronal") return Plane::coronal;
  if (s == "sagittal") return Plane::sagittal;
  throw DomainError("unknown plane '" + std::string(s) + "' (expected axial, coronal or sagittal)");
}

std::string_view to_string(Plane p) noexcept {
  switch (p) {
    case Plane::axial: return "axial";
    case Plane::coronal: return "coronal";
    case Plane::sagittal: return "sagittal";
  }
  return "axial";
}

std::uint8_t window_level(double hu, double center, double width) noexcept {
  const double v = (hu - (center - width / 2.0)) / width * 255.0;
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

PlaneExtent plane_extent(const VoxelGrid& g, Plane plane) noexcept {
  const auto& d = g.dims;
  switch (plane) {
    case Plane::axial: return {d[2], d[0], d[1]};
    case Plane::coronal: return {d[1], d[0], d[2]};
    case Plane::sagittal: return {d[0], d[1], d[2]};
  }
  return {};
}

Raster render_raster(const ImageVolume& image, const LabelVolume& labels, Plane plane, std::int64_t index,
                     double center, double width) {
  if (!check_geometry_compatible(image, labels)) throw GeometryError("image and labels do not share a grid");
  if (!(width > 0.0) || !std::isfinite(center)) throw DomainError("window width must be positive");
  const auto ext = plane_extent(image.grid, plane);
  if (index < 0 || index >= ext.slices) {
    throw DomainError("slice index " + std::to_string(index) + " outside [0, " + std::to_string(ext.slices) + ")");
  }
  const auto& d = image.grid.dims;
  auto voxel = [&](std::int64_t x, std::int64_t y) -> std::size_t {
    switch (plane) {
      case Plane::axial: return image.grid.index(x, y, index);
      case Plane::coronal: return image.grid.index(x, index, d[2] - 1 - y);
      case Plane::sagittal: return image.grid.index(index, x, d[2] - 1 - y);
    }
    return 0;
  };

  Raster r{ext.width, ext.height, std::vector<std::uint8_t>(static_cast<std::size_t>(ext.width * ext.height * 3))};
  std::vector<std::uint8_t> lab(static_cast<std::size_t>(ext.width * ext.height));
  for (std::int64_t y = 0; y < ext.height; ++y) {
    for (std::int64_t x = 0; x < ext.width; ++x) {
      const auto v = voxel(x, y);
      lab[static_cast<std::size_t>(y * ext.width + x)] = labels.voxels[v];
      const auto g = window_level(image.voxels[v], center, width);
      const auto o = static_cast<std::size_t>((y * ext.width + x) * 3);
      r.rgb[o] = r.rgb[o + 1] = r.rgb[o + 2] = g;
    }
  }
  auto at = [&](std::int64_t x, std::int64_t y) -> int {
    if (x < 0 || y < 0 || x >= ext.width || y >= ext.height) return -1;
    return lab[static_cast<std::size_t>(y * ext.width + x)];
  };
  for (std::int64_t y = 0; y < ext.height; ++y) {
    for (std::int64_t x = 0; x < ext.width; ++x) {
      const int l = at(x, y);
      if (l == 0) continue;
      if (at(x - 1, y) != l || at(x + 1, y) != l || at(x, y - 1) != l || at(x, y + 1) != l) {
        const auto c = level_color(static_cast<LevelId>(l));
        const auto o = static_cast<std::size_t>((y * ext.width + x) * 3);
        std::copy(c.begin(), c.end(), r.rgb.begin() + static_cast<std::ptrdiff_t>(o));
      }
    }
  }
  return r;
}

std::vector<std::uint8_t> encode_png(const Raster& r) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(r.width);
  img.height = static_cast<png_uint_32>(r.height);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, r.rgb.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoding failed: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, r.rgb.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoding failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

// ---------------------------------------------------------------------------------------
// Service

ReviewService::ReviewService(ReviewPlan plan, LevelSchema schema, std::filesystem::path log_path,
                             std::filesystem::path data_root)
    : plan_(std::move(plan)),
      schema_(std::move(schema)),
      log_path_(std::move(log_path)),
      data_root_(std::move(data_root)) {
  if (plan_.schema_id != schema_.schema_id) {
    throw ValidationError("plan uses schema '" + plan_.schema_id + "' but '" + schema_.schema_id + "' was given");
  }
  for (auto id : plan_.levels) {
    if (!schema_.contains(id)) throw ValidationError("plan level " + std::to_string(id) + " not in schema");
  }
  if (!std::filesystem::exists(log_path_)) return;

  std::ifstream in(log_path_);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  for (std::size_t n = 0; n < lines.size(); ++n) {
    RatingRecord r;
    try {
      const json j = json::parse(lines[n]);
      r.rater = j.at("rater").get<std::string>();
      r.token = j.at("token").get<std::string>();
      r.level = j.at("level").get<LevelId>();
      r.score = j.at("score").get<double>();
      r.submitted_at = j.at("submitted_at").get<std::string>();
      r.time_on_case_s = j.at("time_on_case_s").get<double>();
    } catch (const json::exception&) {
      // A torn final line is what a crash during append leaves behind.
      if (n + 1 == lines.size()) break;
      throw ParseError("rating log", "corrupt record at line " + std::to_string(n + 1) + " of " +
                                         log_path_.string());
    }
    const auto [rater, assignment] = plan_.lookup(r.token);
    if (rater == nullptr || rater->id != r.rater) {
      throw ValidationError("rating log line " + std::to_string(n + 1) + " does not match the plan");
    }
    apply(r);
  }
}

void ReviewService::apply(const RatingRecord& r) {
  history_.push_back(r);
  effective_[{r.rater, r.token, r.level}] = history_.size() - 1;
}

std::filesystem::path ReviewService::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return (path.is_relative() && !data_root_.empty()) ? data_root_ / path : path;
}

ReviewService::Loaded ReviewService::volumes(const Assignment& a) const {
  const auto& c = plan_.cases.at(a.case_index);
  const auto& label_path = c.sets.at(a.set);
  std::lock_guard lock(cache_mutex_);
  auto& img = images_[c.image];
  if (!img) img = std::make_shared<const ImageVolume>(nifti::read_image(resolve(c.image)));
  auto& lab = labels_[label_path];
  if (!lab) lab = std::make_shared<const LabelVolume>(nifti::read_labels(resolve(label_path), schema_.schema_id));
  return {img, lab};
}

Progress ReviewService::progress(std::string_view session_key) const {
  const auto* rater = plan_.rater_by_key(session_key);
  if (rater == nullptr) throw RangeError("unknown rater session");
  std::lock_guard lock(log_mutex_);
  Progress p;
  p.assignments_total = rater->sequence.size();
  p.ratings_total = rater->sequence.size() * plan_.levels.size();
  for (const auto& a : rater->sequence) {
    std::size_t n = 0;
    for (auto l : plan_.levels) n += effective_.count({rater->id, a.token, l});
    p.ratings_done += n;
    if (n == plan_.levels.size()) ++p.assignments_done;
  }
  return p;
}

std::string ReviewService::progress_json(std::string_view session_key) const {
  const auto p = progress(session_key);
  return json{{"assignments_done", p.assignments_done},
              {"assignments_total", p.assignments_total},
              {"ratings_done", p.ratings_done},
              {"ratings_total", p.ratings_total},
              {"complete", p.assignments_done == p.assignments_total}}
      .dump();
}

std::string ReviewService::next_assignment_json(std::string_view session_key) const {
  const auto* rater = plan_.rater_by_key(session_key);
  if (rater == nullptr) throw RangeError("unknown rater session");

  const Assignment* next = nullptr;
  std::size_t position = 0;
  std::map<LevelId, double> scores;
  {
    std::lock_guard lock(log_mutex_);
    for (std::size_t n = 0; n < rater->sequence.size() && next == nullptr; ++n) {
      const auto& a = rater->sequence[n];
      std::map<LevelId, double> s;
      for (auto l : plan_.levels) {
        const auto it = effective_.find({rater->id, a.token, l});
        if (it != effective_.end()) s[l] = history_[it->second].score;
      }
      if (s.size() < plan_.levels.size()) {
        next = &a;
        position = n;
        scores = std::move(s);
      }
    }
  }
  if (next == nullptr) {
    return json{{"complete", true}, {"total", rater->sequence.size()}}.dump();
  }

  const auto vols = volumes(*next);
  const auto& g = vols.image->grid;
  json planes = json::object();
  for (auto p : {Plane::axial, Plane::coronal, Plane::sagittal}) {
    const auto e = plane_extent(g, p);
    planes[std::string(to_string(p))] = {{"slices", e.slices}, {"width", e.width}, {"height", e.height}};
  }
  json levels = json::array();
  for (auto l : plan_.levels) {
    json e{{"id", l}, {"name", schema_.find(l)->name}, {"color", color_hex(l)}};
    const auto it = scores.find(l);
    e["score"] = it == scores.end() ? json(nullptr) : json(it->second);
    levels.push_back(std::move(e));
  }
  return json{{"complete", false},
              {"token", next->token},
              {"position", position + 1},
              {"total", rater->sequence.size()},
              {"case", plan_.cases[next->case_index].id},
              {"spacing_mm", g.spacing_mm},
              {"planes", planes},
              {"window", {{"center", 40.0}, {"width", 400.0}}},
              {"levels", levels}}
      .dump();
}

std::string ReviewService::palette_json() const {
  json levels = json::array();
  for (auto l : plan_.levels) levels.push_back({{"id", l}, {"name", schema_.find(l)->name}, {"color", color_hex(l)}});
  return json{{"schema_id", schema_.schema_id}, {"levels", levels}}.dump();
}

Raster ReviewService::render(const RenderRequest& req) const {
  const auto [rater, assignment] = plan_.lookup(req.token);
  if (assignment == nullptr) throw RangeError("unknown assignment token");
  const auto vols = volumes(*assignment);
  return render_raster(*vols.image, *vols.labels, req.plane, req.index, req.window_center, req.window_width);
}

std::vector<std::uint8_t> ReviewService::render_png(const RenderRequest& req) const {
  return encode_png(render(req));
}

RatingRecord ReviewService::submit_rating(std::string_view session_key, std::string_view token, int level,
                                          double score, double time_on_case_s) {
  const auto* rater = plan_.rater_by_key(session_key);
  if (rater == nullptr) throw RangeError("unknown rater session");
  const auto [owner, assignment] = plan_.lookup(token);
  if (assignment == nullptr || owner != rater) throw RangeError("token is not assigned to this rater");
  if (level < 0 || level > 255 ||
      std::find(plan_.levels.begin(), plan_.levels.end(), static_cast<LevelId>(level)) == plan_.levels.end()) {
    throw DomainError("level " + std::to_string(level) + " is not rated in this plan");
  }
  if (!(score >= 0.0 && score <= 100.0)) throw DomainError("score must lie in [0, 100]");
  if (!(time_on_case_s >= 0.0) || !std::isfinite(time_on_case_s)) {
    throw DomainError("time_on_case_s must be a non-negative number");
  }

  RatingRecord r{rater->id, std::string(token), static_cast<LevelId>(level), score, utc_now(), time_on_case_s};
  const std::string line = record_json(r).dump() + "\n";

  std::lock_guard lock(log_mutex_);
  const int fd = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open rating log " + log_path_.string());
  const auto written = ::write(fd, line.data(), line.size());
  const bool ok = written == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok) throw IoError("append to rating log " + log_path_.string() + " failed");
  apply(r);
  return r;
}

std::vector<RatingRecord> ReviewService::history() const {
  std::lock_guard lock(log_mutex_);
  return history_;
}

std::vector<RatingRecord> ReviewService::effective_ratings() const {
  std::lock_guard lock(log_mutex_);
  std::vector<RatingRecord> out;
  for (const auto& r : plan_.raters) {
    for (const auto& a : r.sequence) {
      for (auto l : plan_.levels) {
        const auto it = effective_.find({r.id, a.token, l});
        if (it != effective_.end()) out.push_back(history_[it->second]);
      }
    }
  }
  return out;
}

std::string ReviewService::export_csv(bool unblind) const {
  std::ostringstream os;
  os << "rater,case,contour_set,level,level_name,score,category,submitted_at,time_on_case_s\n";
  for (const auto& r : effective_ratings()) {
    const auto [rater, a] = plan_.lookup(r.token);
    os << r.rater << ',' << plan_.cases[a->case_index].id << ',' << (unblind ? a->set : a->token) << ','
       << static_cast<int>(r.level) << ',' << schema_.find(r.level)->name << ',' << fmt_number(r.score) << ','
       << rating_category(r.score) << ',' << r.submitted_at << ',' << fmt_number(r.time_on_case_s) << '\n';
  }
  return os.str();
}

}  // namespace lnl::review

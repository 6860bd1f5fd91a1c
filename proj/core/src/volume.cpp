#include "lnl/volume.hpp"

#include <cmath>
#include <sstream>

namespace lnl {

char axis_code_char(AxisCode c) noexcept {
  switch (c) {
    case AxisCode::R: return 'R';
    case AxisCode::L: return 'L';
    case AxisCode::A: return 'A';
    case AxisCode::P: return 'P';
    case AxisCode::S: return 'S';
    case AxisCode::I: return 'I';
  }
  return '?';
}

AxisCode axis_code_from_char(char c) {
  switch (c) {
    case 'R': case 'r': return AxisCode::R;
    case 'L': case 'l': return AxisCode::L;
    case 'A': case 'a': return AxisCode::A;
    case 'P': case 'p': return AxisCode::P;
    case 'S': case 's': return AxisCode::S;
    case 'I': case 'i': return AxisCode::I;
    default: break;
  }
  throw ValidationError(std::string("unknown axis code '") + c + "'");
}

AxisCode opposite(AxisCode c) noexcept {
  switch (c) {
    case AxisCode::R: return AxisCode::L;
    case AxisCode::L: return AxisCode::R;
    case AxisCode::A: return AxisCode::P;
    case AxisCode::P: return AxisCode::A;
    case AxisCode::S: return AxisCode::I;
    case AxisCode::I: return AxisCode::S;
  }
  return c;
}

int anatomical_line(AxisCode c) noexcept {
  switch (c) {
    case AxisCode::R: case AxisCode::L: return 0;
    case AxisCode::A: case AxisCode::P: return 1;
    case AxisCode::S: case AxisCode::I: return 2;
  }
  return -1;
}

namespace {

// Signed unit direction in RAS+ world coordinates.
Vec3 direction(AxisCode c) {
  switch (c) {
    case AxisCode::R: return {1, 0, 0};
    case AxisCode::L: return {-1, 0, 0};
    case AxisCode::A: return {0, 1, 0};
    case AxisCode::P: return {0, -1, 0};
    case AxisCode::S: return {0, 0, 1};
    case AxisCode::I: return {0, 0, -1};
  }
  return {0, 0, 0};
}

}  // namespace

Vec3 VoxelGrid::world(double i, double j, double k) const noexcept {
  const double idx[3] = {i, j, k};
  Vec3 p = origin_mm;
  for (int a = 0; a < 3; ++a) {
    const Vec3 d = direction(axes[a]);
    for (int w = 0; w < 3; ++w) p[w] += d[w] * idx[a] * spacing_mm[a];
  }
  return p;
}

int VoxelGrid::axis_for_line(int line) const noexcept {
  for (int a = 0; a < 3; ++a) {
    if (anatomical_line(axes[a]) == line) return a;
  }
  return -1;
}

void VoxelGrid::validate() const {
  std::vector<std::string> problems;
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) problems.push_back("dims[" + std::to_string(a) + "] < 1");
    if (!(spacing_mm[a] > 0.0) || !std::isfinite(spacing_mm[a])) {
      problems.push_back("spacing[" + std::to_string(a) + "] not positive");
    }
    if (!std::isfinite(origin_mm[a])) problems.push_back("origin[" + std::to_string(a) + "] not finite");
  }
  if (anatomical_line(axes[0]) == anatomical_line(axes[1]) ||
      anatomical_line(axes[0]) == anatomical_line(axes[2]) ||
      anatomical_line(axes[1]) == anatomical_line(axes[2])) {
    problems.push_back("axis codes do not span three anatomical lines");
  }
  if (!problems.empty()) {
    std::string msg = "invalid voxel grid:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ValidationError(msg);
  }
}

std::string VoxelGrid::describe() const {
  std::ostringstream os;
  os << dims[0] << "x" << dims[1] << "x" << dims[2] << " @ (" << spacing_mm[0] << ", "
     << spacing_mm[1] << ", " << spacing_mm[2] << ") mm " << axis_code_char(axes[0])
     << axis_code_char(axes[1]) << axis_code_char(axes[2]);
  return os.str();
}

GeometryCheck check_geometry_compatible(const VoxelGrid& a, const VoxelGrid& b) {
  GeometryCheck out;
  auto fail = [&](std::string what) {
    out.compatible = false;
    out.mismatches.push_back(std::move(what));
  };
  if (a.dims != b.dims) fail("dims");
  for (int i = 0; i < 3; ++i) {
    if (std::abs(a.spacing_mm[i] - b.spacing_mm[i]) > kSpacingTolMm) {
      fail("spacing");
      break;
    }
  }
  for (int i = 0; i < 3; ++i) {
    if (std::abs(a.origin_mm[i] - b.origin_mm[i]) > kOriginTolMm) {
      fail("origin");
      break;
    }
  }
  if (a.axes != b.axes) fail("axis_codes");
  return out;
}

std::array<std::size_t, 256> label_histogram(const LabelVolume& labels) {
  std::array<std::size_t, 256> h{};
  for (auto v : labels.voxels) ++h[v];
  return h;
}

MaskVolume label_mask(const LabelVolume& labels, int id) {
  MaskVolume m(labels.grid, std::uint8_t{0});
  const auto n = labels.voxels.size();
  if (id < 0) {
    for (std::size_t i = 0; i < n; ++i) m.voxels[i] = labels.voxels[i] != 0;
  } else {
    const auto want = static_cast<std::uint8_t>(id);
    for (std::size_t i = 0; i < n; ++i) m.voxels[i] = labels.voxels[i] == want;
  }
  return m;
}

}  // namespace lnl

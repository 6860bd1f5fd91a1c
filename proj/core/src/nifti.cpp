#include "lnl/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <system_error>

namespace lnl::nifti {

static_assert(std::endian::native == std::endian::little, "NIfTI reader assumes a little-endian host");

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

enum DataType : std::int16_t {
  DT_UINT8 = 2,
  DT_INT16 = 4,
  DT_INT32 = 8,
  DT_FLOAT32 = 16,
  DT_FLOAT64 = 64,
  DT_INT8 = 256,
  DT_UINT16 = 512,
  DT_UINT32 = 768,
};

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case DT_UINT8: case DT_INT8: return 1;
    case DT_INT16: case DT_UINT16: return 2;
    case DT_INT32: case DT_UINT32: case DT_FLOAT32: return 4;
    case DT_FLOAT64: return 8;
    default: return 0;
  }
}

template <typename T>
T load(std::span<const std::byte> b, std::size_t off) {
  T v;
  std::memcpy(&v, b.data() + off, sizeof(T));
  return v;
}

template <typename T>
void store(std::vector<std::byte>& b, std::size_t off, T v) {
  std::memcpy(b.data() + off, &v, sizeof(T));
}

using Mat3 = std::array<Vec3, 3>;  // columns

struct Header {
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::array<float, 8> pixdim{};
  std::size_t vox_offset = 0;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  // Affine: columns map index axes to RAS mm, plus translation.
  Mat3 columns{};
  Vec3 offset{};
  Index3 dims{1, 1, 1};
};

Header parse_header(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw ParseError("header", "file holds " + std::to_string(bytes.size()) +
                                   " bytes, fewer than the 348-byte NIfTI-1 header");
  }
  const auto sizeof_hdr = load<std::int32_t>(bytes, 0);
  if (sizeof_hdr != 348) {
    if (sizeof_hdr == 0x5C010000) throw ParseError("sizeof_hdr", "big-endian files are not supported");
    throw ParseError("sizeof_hdr", "expected 348, found " + std::to_string(sizeof_hdr));
  }
  const char* magic = reinterpret_cast<const char*>(bytes.data() + 344);
  if (!(magic[0] == 'n' && magic[1] == '+' && magic[2] == '1' && magic[3] == '\0')) {
    throw ParseError("magic", "expected \"n+1\" single-file NIfTI-1");
  }

  Header h;
  for (int i = 0; i < 8; ++i) h.dim[i] = load<std::int16_t>(bytes, 40 + 2 * i);
  if (h.dim[0] < 1 || h.dim[0] > 7) throw ParseError("dim", "dim[0] must be in 1..7");
  for (int i = 1; i <= h.dim[0]; ++i) {
    if (h.dim[i] < 1) throw ParseError("dim", "dim[" + std::to_string(i) + "] must be >= 1");
    if (i > 3 && h.dim[i] != 1) throw ParseError("dim", "only 3D volumes are supported");
  }
  for (int i = 0; i < 3; ++i) h.dims[i] = (i + 1 <= h.dim[0]) ? h.dim[i + 1] : 1;

  h.datatype = load<std::int16_t>(bytes, 70);
  const int bpv = bytes_per_voxel(h.datatype);
  if (bpv == 0) throw ParseError("datatype", "unsupported datatype code " + std::to_string(h.datatype));
  const auto bitpix = load<std::int16_t>(bytes, 72);
  if (bitpix != 8 * bpv) throw ParseError("bitpix", "inconsistent with datatype");

  for (int i = 0; i < 8; ++i) h.pixdim[i] = load<float>(bytes, 76 + 4 * i);

  const float vox_offset = load<float>(bytes, 108);
  if (!std::isfinite(vox_offset) || vox_offset < static_cast<float>(kDataOffset) ||
      vox_offset != std::floor(vox_offset) || vox_offset > 1e12f) {
    throw ParseError("vox_offset", "must be an integer >= 352");
  }
  h.vox_offset = static_cast<std::size_t>(vox_offset);

  h.scl_slope = load<float>(bytes, 112);
  h.scl_inter = load<float>(bytes, 116);
  if (!std::isfinite(h.scl_slope) || !std::isfinite(h.scl_inter)) {
    throw ParseError("scl_slope", "scaling must be finite");
  }

  const auto qform_code = load<std::int16_t>(bytes, 252);
  const auto sform_code = load<std::int16_t>(bytes, 254);

  if (sform_code > 0) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        const float v = load<float>(bytes, 280 + 16 * r + 4 * c);
        if (!std::isfinite(v)) throw ParseError("srow", "non-finite affine entry");
        if (c < 3) h.columns[c][r] = v; else h.offset[r] = v;
      }
    }
  } else if (qform_code > 0) {
    const double b = load<float>(bytes, 256);
    const double c = load<float>(bytes, 260);
    const double d = load<float>(bytes, 264);
    for (int i = 0; i < 3; ++i) {
      const float o = load<float>(bytes, 268 + 4 * i);
      if (!std::isfinite(o)) throw ParseError("qoffset", "non-finite offset");
      h.offset[i] = o;
    }
    if (!std::isfinite(b) || !std::isfinite(c) || !std::isfinite(d)) {
      throw ParseError("quatern", "non-finite quaternion");
    }
    double a = 1.0 - (b * b + c * c + d * d);
    if (a < -1e-6) throw ParseError("quatern", "quaternion norm exceeds 1");
    a = a > 0.0 ? std::sqrt(a) : 0.0;
    const double R[3][3] = {
        {a * a + b * b - c * c - d * d, 2 * b * c - 2 * a * d, 2 * b * d + 2 * a * c},
        {2 * b * c + 2 * a * d, a * a + c * c - b * b - d * d, 2 * c * d - 2 * a * b},
        {2 * b * d - 2 * a * c, 2 * c * d + 2 * a * b, a * a + d * d - c * c - b * b}};
    const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
    for (int col = 0; col < 3; ++col) {
      const double s = h.pixdim[col + 1];
      if (!std::isfinite(s) || s <= 0) throw ParseError("pixdim", "voxel size must be positive");
      for (int r = 0; r < 3; ++r) h.columns[col][r] = R[r][col] * s * (col == 2 ? qfac : 1.0);
    }
  } else {
    for (int col = 0; col < 3; ++col) {
      const double s = h.pixdim[col + 1];
      if (!std::isfinite(s) || s <= 0) throw ParseError("pixdim", "voxel size must be positive");
      h.columns[col] = {0, 0, 0};
      h.columns[col][col] = s;
    }
  }
  return h;
}

AxisCode code_for(int world_axis, bool positive) {
  static constexpr AxisCode pos[3] = {AxisCode::R, AxisCode::A, AxisCode::S};
  return positive ? pos[world_axis] : opposite(pos[world_axis]);
}

// Decomposes an axis-aligned affine into spacing, axis codes and origin.
VoxelGrid grid_from_header(const Header& h) {
  VoxelGrid g;
  g.dims = h.dims;
  g.origin_mm = h.offset;
  std::array<bool, 3> used{};
  for (int col = 0; col < 3; ++col) {
    const Vec3& c = h.columns[col];
    const double norm = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw GeometryError("affine column " + std::to_string(col) + " has zero length");
    }
    int best = 0;
    for (int w = 1; w < 3; ++w) {
      if (std::abs(c[w]) > std::abs(c[best])) best = w;
    }
    for (int w = 0; w < 3; ++w) {
      if (w != best && std::abs(c[w]) / norm > kObliqueTolerance) {
        throw GeometryError("oblique affine (column " + std::to_string(col) +
                            ") is not supported; resample before use");
      }
    }
    if (used[best]) throw GeometryError("affine columns are not orthogonal");
    used[best] = true;
    g.spacing_mm[col] = norm;
    g.axes[col] = code_for(best, c[best] > 0);
  }
  return g;
}

// Permutes/flips so that the k-axis is the S/I line pointing superior.
template <typename T>
Volume<T> canonicalize(Volume<T> v) {
  const int si = v.grid.axis_for_line(2);
  if (si == 2 && v.grid.axes[2] == AxisCode::S) return v;

  std::array<int, 3> perm{};  // perm[new] = old
  int n = 0;
  for (int a = 0; a < 3; ++a) {
    if (a != si) perm[n++] = a;
  }
  perm[2] = si;
  const bool flip_k = v.grid.axes[si] == AxisCode::I;

  VoxelGrid g;
  for (int a = 0; a < 3; ++a) {
    g.dims[a] = v.grid.dims[perm[a]];
    g.spacing_mm[a] = v.grid.spacing_mm[perm[a]];
    g.axes[a] = v.grid.axes[perm[a]];
  }
  if (flip_k) {
    g.axes[2] = AxisCode::S;
    Vec3 idx{0, 0, 0};
    idx[si] = static_cast<double>(v.grid.dims[si] - 1);
    g.origin_mm = v.grid.world(idx[0], idx[1], idx[2]);
  } else {
    g.origin_mm = v.grid.origin_mm;
  }

  Volume<T> out(g, T{});
  std::array<std::int64_t, 3> old{};
  for (std::int64_t k = 0; k < g.dims[2]; ++k) {
    old[perm[2]] = flip_k ? g.dims[2] - 1 - k : k;
    for (std::int64_t j = 0; j < g.dims[1]; ++j) {
      old[perm[1]] = j;
      for (std::int64_t i = 0; i < g.dims[0]; ++i) {
        old[perm[0]] = i;
        out.at(i, j, k) = v.at(old[0], old[1], old[2]);
      }
    }
  }
  return out;
}

// Calls f(index, value-as-double) for each stored voxel.
template <typename F>
void for_each_stored(const Header& h, std::span<const std::byte> data, std::size_t n, F&& f) {
  auto run = [&](auto tag) {
    using S = decltype(tag);
    for (std::size_t i = 0; i < n; ++i) f(i, static_cast<double>(load<S>(data, i * sizeof(S))));
  };
  switch (h.datatype) {
    case DT_UINT8: run(std::uint8_t{}); break;
    case DT_INT8: run(std::int8_t{}); break;
    case DT_INT16: run(std::int16_t{}); break;
    case DT_UINT16: run(std::uint16_t{}); break;
    case DT_INT32: run(std::int32_t{}); break;
    case DT_UINT32: run(std::uint32_t{}); break;
    case DT_FLOAT32: run(float{}); break;
    case DT_FLOAT64: run(double{}); break;
    default: throw ParseError("datatype", "unsupported");
  }
}

std::span<const std::byte> payload(const Header& h, std::span<const std::byte> bytes) {
  const std::size_t bpv = static_cast<std::size_t>(bytes_per_voxel(h.datatype));
  const std::size_t n = static_cast<std::size_t>(h.dims[0]) * static_cast<std::size_t>(h.dims[1]) *
                        static_cast<std::size_t>(h.dims[2]);
  if (h.vox_offset > bytes.size() || (bytes.size() - h.vox_offset) / bpv < n) {
    throw ParseError("data", "file ends before the declared voxel data extent");
  }
  return bytes.subspan(h.vox_offset, n * bpv);
}

std::span<const std::byte> maybe_inflate(std::span<const std::byte> raw, std::vector<std::byte>& storage) {
  if (raw.size() >= 2 && raw[0] == std::byte{0x1f} && raw[1] == std::byte{0x8b}) {
    storage = gunzip(raw);
    return storage;
  }
  return raw;
}

std::vector<std::byte> make_header(const VoxelGrid& g, std::int16_t datatype, std::int16_t bitpix) {
  std::vector<std::byte> b(kDataOffset, std::byte{0});
  store<std::int32_t>(b, 0, 348);
  store<char>(b, 38, 'r');
  const std::int16_t dim[8] = {3,
                               static_cast<std::int16_t>(g.dims[0]),
                               static_cast<std::int16_t>(g.dims[1]),
                               static_cast<std::int16_t>(g.dims[2]),
                               1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) store<std::int16_t>(b, 40 + 2 * i, dim[i]);
  store<std::int16_t>(b, 70, datatype);
  store<std::int16_t>(b, 72, bitpix);

  // Affine: column a = spacing[a] * direction(axes[a]).
  Mat3 cols{};
  for (int a = 0; a < 3; ++a) {
    const Vec3 o = g.world(0, 0, 0);
    Vec3 idx{0, 0, 0};
    idx[a] = 1.0;
    const Vec3 p = g.world(idx[0], idx[1], idx[2]);
    for (int w = 0; w < 3; ++w) cols[a][w] = p[w] - o[w];
  }

  // qform: proper rotation with qfac absorbing a reflection in the third column.
  double R[3][3];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) R[r][c] = cols[c][r] / g.spacing_mm[c];
  const double det = R[0][0] * (R[1][1] * R[2][2] - R[1][2] * R[2][1]) -
                     R[0][1] * (R[1][0] * R[2][2] - R[1][2] * R[2][0]) +
                     R[0][2] * (R[1][0] * R[2][1] - R[1][1] * R[2][0]);
  const float qfac = det < 0 ? -1.0f : 1.0f;
  if (det < 0) {
    for (int r = 0; r < 3; ++r) R[r][2] = -R[r][2];
  }
  double a = R[0][0] + R[1][1] + R[2][2] + 1.0;
  double qb, qc, qd;
  if (a > 0.5) {
    a = 0.5 * std::sqrt(a);
    qb = 0.25 * (R[2][1] - R[1][2]) / a;
    qc = 0.25 * (R[0][2] - R[2][0]) / a;
    qd = 0.25 * (R[1][0] - R[0][1]) / a;
  } else {
    const double xd = 1.0 + R[0][0] - (R[1][1] + R[2][2]);
    const double yd = 1.0 + R[1][1] - (R[0][0] + R[2][2]);
    const double zd = 1.0 + R[2][2] - (R[0][0] + R[1][1]);
    if (xd > 1.0) {
      qb = 0.5 * std::sqrt(xd);
      qc = 0.25 * (R[0][1] + R[1][0]) / qb;
      qd = 0.25 * (R[0][2] + R[2][0]) / qb;
      a = 0.25 * (R[2][1] - R[1][2]) / qb;
    } else if (yd > 1.0) {
      qc = 0.5 * std::sqrt(yd);
      qb = 0.25 * (R[0][1] + R[1][0]) / qc;
      qd = 0.25 * (R[1][2] + R[2][1]) / qc;
      a = 0.25 * (R[0][2] - R[2][0]) / qc;
    } else {
      qd = 0.5 * std::sqrt(zd);
      qb = 0.25 * (R[0][2] + R[2][0]) / qd;
      qc = 0.25 * (R[1][2] + R[2][1]) / qd;
      a = 0.25 * (R[1][0] - R[0][1]) / qd;
    }
    if (a < 0.0) {
      qb = -qb;
      qc = -qc;
      qd = -qd;
    }
  }

  const float pixdim[8] = {qfac,
                           static_cast<float>(g.spacing_mm[0]),
                           static_cast<float>(g.spacing_mm[1]),
                           static_cast<float>(g.spacing_mm[2]),
                           0, 0, 0, 0};
  for (int i = 0; i < 8; ++i) store<float>(b, 76 + 4 * i, pixdim[i]);
  store<float>(b, 108, static_cast<float>(kDataOffset));
  store<float>(b, 112, 1.0f);
  store<float>(b, 116, 0.0f);
  store<std::uint8_t>(b, 123, 2);  // NIFTI_UNITS_MM
  const char descrip[] = "lnlevel";
  std::memcpy(b.data() + 148, descrip, sizeof(descrip));
  store<std::int16_t>(b, 252, 1);  // NIFTI_XFORM_SCANNER_ANAT
  store<std::int16_t>(b, 254, 1);
  store<float>(b, 256, static_cast<float>(qb));
  store<float>(b, 260, static_cast<float>(qc));
  store<float>(b, 264, static_cast<float>(qd));
  for (int w = 0; w < 3; ++w) store<float>(b, 268 + 4 * w, static_cast<float>(g.origin_mm[w]));
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) store<float>(b, 280 + 16 * r + 4 * c, static_cast<float>(cols[c][r]));
    store<float>(b, 280 + 16 * r + 12, static_cast<float>(g.origin_mm[r]));
  }
  std::memcpy(b.data() + 344, "n+1\0", 4);
  return b;
}

void check_writable_dims(const VoxelGrid& g) {
  g.validate();
  for (auto d : g.dims) {
    if (d > std::numeric_limits<std::int16_t>::max()) {
      throw DomainError("dimension " + std::to_string(d) + " exceeds the NIfTI-1 limit of 32767");
    }
  }
}

}  // namespace

ImageVolume parse_image(std::span<const std::byte> raw) {
  std::vector<std::byte> storage;
  const auto bytes = maybe_inflate(raw, storage);
  const Header h = parse_header(bytes);
  const VoxelGrid g = grid_from_header(h);
  const auto data = payload(h, bytes);
  const bool scaled = h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f);
  ImageVolume v(g, 0.0f);
  for_each_stored(h, data, v.size(), [&](std::size_t i, double x) {
    if (scaled) x = x * h.scl_slope + h.scl_inter;
    v.voxels[i] = static_cast<float>(x);
  });
  return canonicalize(std::move(v));
}

LabelVolume parse_labels(std::span<const std::byte> raw, std::string schema_id) {
  std::vector<std::byte> storage;
  const auto bytes = maybe_inflate(raw, storage);
  const Header h = parse_header(bytes);
  if (!((h.scl_slope == 0.0f || h.scl_slope == 1.0f) && h.scl_inter == 0.0f)) {
    throw DomainError("label volumes must not carry intensity scaling (scl_slope/scl_inter)");
  }
  const VoxelGrid g = grid_from_header(h);
  const auto data = payload(h, bytes);
  Volume<std::uint8_t> v(g, std::uint8_t{0});
  for_each_stored(h, data, v.size(), [&](std::size_t i, double x) {
    if (!std::isfinite(x) || x != std::floor(x)) {
      throw DomainError("non-integer label value " + std::to_string(x) + " at voxel " + std::to_string(i));
    }
    if (x < 0 || x > 255) {
      throw DomainError("label value " + std::to_string(static_cast<long long>(x)) +
                        " outside 0..255 at voxel " + std::to_string(i));
    }
    v.voxels[i] = static_cast<std::uint8_t>(x);
  });
  auto c = canonicalize(std::move(v));
  return LabelVolume(std::move(c.grid), std::move(c.voxels), std::move(schema_id));
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  if (size < 0) throw IoError("cannot determine size of '" + path.string() + "'");
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(static_cast<std::size_t>(size));
  if (!bytes.empty() && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw IoError("failed reading '" + path.string() + "'");
  }
  return bytes;
}

ImageVolume read_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_image(bytes);
  } catch (const ParseError& e) {
    throw ParseError(e.field(), path.string() + ": " + e.what());
  }
}

LabelVolume read_labels(const std::filesystem::path& path, std::string schema_id) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_labels(bytes, std::move(schema_id));
  } catch (const ParseError& e) {
    throw ParseError(e.field(), path.string() + ": " + e.what());
  }
}

std::variant<ImageVolume, LabelVolume> read(const std::filesystem::path& path, Kind kind) {
  if (kind == Kind::image) return read_image(path);
  return read_labels(path);
}

std::vector<std::byte> encode(const ImageVolume& image, ImageStorage storage) {
  check_writable_dims(image.grid);
  if (storage == ImageStorage::automatic) {
    storage = ImageStorage::int16;
    for (float v : image.voxels) {
      if (!(v == std::floor(v)) || v < -32768.0f || v > 32767.0f || (v == 0.0f && std::signbit(v))) {
        storage = ImageStorage::float32;
        break;
      }
    }
  }
  const bool as_int16 = storage == ImageStorage::int16;
  auto b = make_header(image.grid, as_int16 ? DT_INT16 : DT_FLOAT32, as_int16 ? 16 : 32);
  const std::size_t bpv = as_int16 ? 2 : 4;
  b.resize(kDataOffset + image.size() * bpv);
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (as_int16) {
      const float v = std::clamp(std::round(image.voxels[i]), -32768.0f, 32767.0f);
      store<std::int16_t>(b, kDataOffset + 2 * i, static_cast<std::int16_t>(v));
    } else {
      store<float>(b, kDataOffset + 4 * i, image.voxels[i]);
    }
  }
  return b;
}

std::vector<std::byte> encode(const Volume<std::uint8_t>& labels) {
  check_writable_dims(labels.grid);
  auto b = make_header(labels.grid, DT_UINT8, 8);
  b.resize(kDataOffset + labels.size());
  std::memcpy(b.data() + kDataOffset, labels.voxels.data(), labels.size());
  return b;
}

namespace {

bool wants_gzip(const std::filesystem::path& path) { return path.extension() == ".gz"; }

void write_encoded(std::vector<std::byte> bytes, const std::filesystem::path& path) {
  if (wants_gzip(path)) bytes = gzip(bytes);
  write_file_atomic(path, bytes);
}

}  // namespace

void write(const ImageVolume& image, const std::filesystem::path& path, ImageStorage storage) {
  write_encoded(encode(image, storage), path);
}

void write(const Volume<std::uint8_t>& labels, const std::filesystem::path& path) {
  write_encoded(encode(labels), path);
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::random_device rd;
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw IoError("cannot move temporary file into '" + path.string() + "': " + ec.message());
  }
}

std::vector<std::byte> gunzip(std::span<const std::byte> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IoError("zlib initialisation failed");
  std::vector<std::byte> out(std::max<std::size_t>(bytes.size() * 4, 1 << 16));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::size_t produced = 0;
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    if (produced == out.size()) out.resize(out.size() * 2);
    zs.next_out = reinterpret_cast<Bytef*>(out.data() + produced);
    zs.avail_out = static_cast<uInt>(std::min<std::size_t>(out.size() - produced, 1u << 30));
    const auto before = zs.avail_out;
    rc = inflate(&zs, Z_NO_FLUSH);
    produced += before - zs.avail_out;
    if (rc == Z_STREAM_END) break;
    if (rc != Z_OK && rc != Z_BUF_ERROR) {
      inflateEnd(&zs);
      throw ParseError("gzip", "corrupt compressed stream");
    }
    if (rc == Z_BUF_ERROR && zs.avail_in == 0) {
      inflateEnd(&zs);
      throw ParseError("gzip", "truncated compressed stream");
    }
  }
  inflateEnd(&zs);
  out.resize(produced);
  return out;
}

std::vector<std::byte> gzip(std::span<const std::byte> bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw IoError("zlib initialisation failed");
  }
  std::vector<std::byte> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 64);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

}  // namespace lnl::nifti

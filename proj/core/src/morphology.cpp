#include "lnl/morphology.hpp"

#include <algorithm>
#include <numeric>

namespace lnl {

namespace {

struct DisjointSet {
  std::vector<std::uint32_t> parent;

  std::uint32_t make() {
    parent.push_back(static_cast<std::uint32_t>(parent.size()));
    return parent.back();
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent[b] = a; else parent[a] = b;
  }
};

}  // namespace

ComponentLabeling label_components(const Volume<std::uint8_t>& v, Connectivity connectivity) {
  const auto nx = v.grid.dims[0], ny = v.grid.dims[1], nz = v.grid.dims[2];
  const std::int64_t sx = 1, sy = nx, sz = nx * ny;

  // Neighbors already visited in raster order.
  struct Offset { int di, dj, dk; };
  std::vector<Offset> back;
  if (connectivity == Connectivity::face6) {
    back = {{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
  } else {
    for (int dk = -1; dk <= 0; ++dk)
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (dk == 0 && (dj > 0 || (dj == 0 && di >= 0))) continue;
          back.push_back({di, dj, dk});
        }
  }

  ComponentLabeling out;
  out.component.assign(v.size(), 0);
  DisjointSet ds;
  ds.make();  // provisional label 0 = none

  for (std::int64_t k = 0; k < nz; ++k) {
    for (std::int64_t j = 0; j < ny; ++j) {
      for (std::int64_t i = 0; i < nx; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i * sx + j * sy + k * sz);
        const auto val = v.voxels[idx];
        if (val == 0) continue;
        std::uint32_t label = 0;
        for (const auto& o : back) {
          const auto ii = i + o.di, jj = j + o.dj, kk = k + o.dk;
          if (ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny) continue;
          const std::size_t n = static_cast<std::size_t>(ii * sx + jj * sy + kk * sz);
          if (v.voxels[n] != val) continue;
          const auto nl = out.component[n];
          if (label == 0) label = nl; else if (nl != label) ds.unite(label, nl);
        }
        if (label == 0) label = ds.make();
        out.component[idx] = label;
      }
    }
  }

  // Flatten to dense ids in order of first appearance.
  std::vector<std::uint32_t> dense(ds.parent.size(), 0);
  out.size.assign(1, 0);
  out.first_voxel.assign(1, 0);
  out.value.assign(1, 0);
  for (std::size_t idx = 0; idx < out.component.size(); ++idx) {
    const auto p = out.component[idx];
    if (p == 0) continue;
    const auto root = ds.find(p);
    if (dense[root] == 0) {
      dense[root] = static_cast<std::uint32_t>(out.size.size());
      out.size.push_back(0);
      out.first_voxel.push_back(idx);
      out.value.push_back(v.voxels[idx]);
    }
    const auto id = dense[root];
    out.component[idx] = id;
    ++out.size[id];
  }
  return out;
}

MaskVolume keep_largest_component(const MaskVolume& mask, Connectivity connectivity) {
  MaskVolume bin(mask.grid, std::uint8_t{0});
  for (std::size_t i = 0; i < mask.size(); ++i) bin.voxels[i] = mask.voxels[i] != 0;
  const auto cc = label_components(bin, connectivity);
  if (cc.count() == 0) return bin;
  std::uint32_t best = 1;
  // Ids are assigned in order of first voxel, so strict > keeps the earliest on ties.
  for (std::uint32_t c = 2; c < cc.size.size(); ++c) {
    if (cc.size[c] > cc.size[best]) best = c;
  }
  for (std::size_t i = 0; i < bin.size(); ++i) bin.voxels[i] = cc.component[i] == best;
  return bin;
}

namespace {

// One separable pass along `axis`: out = 1 where the count of ones inside the clipped
// window [x-r, x+r] satisfies the predicate.
template <typename Pred>
void box_pass(const std::vector<std::uint8_t>& in, std::vector<std::uint8_t>& out, const Index3& dims,
              int axis, int r, Pred pred) {
  const std::int64_t n = dims[axis];
  const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? dims[0] : dims[0] * dims[1]);
  std::vector<std::int64_t> prefix(static_cast<std::size_t>(n) + 1);
  Index3 lines = dims;
  lines[axis] = 1;
  for (std::int64_t c = 0; c < lines[2]; ++c) {
    for (std::int64_t b = 0; b < lines[1]; ++b) {
      for (std::int64_t a = 0; a < lines[0]; ++a) {
        const std::int64_t base = a + dims[0] * (b + dims[1] * c);
        prefix[0] = 0;
        for (std::int64_t x = 0; x < n; ++x) prefix[x + 1] = prefix[x] + in[base + x * stride];
        for (std::int64_t x = 0; x < n; ++x) {
          const auto lo = std::max<std::int64_t>(0, x - r);
          const auto hi = std::min<std::int64_t>(n - 1, x + r);
          out[base + x * stride] = pred(prefix[hi + 1] - prefix[lo], hi - lo + 1) ? 1 : 0;
        }
      }
    }
  }
}

template <typename Pred>
MaskVolume box_filter(const MaskVolume& mask, const std::array<int, 3>& radius, Pred pred) {
  MaskVolume out(mask.grid, std::uint8_t{0});
  std::vector<std::uint8_t> cur(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) cur[i] = mask.voxels[i] != 0;
  std::vector<std::uint8_t> next(mask.size());
  for (int axis = 0; axis < 3; ++axis) {
    if (radius[axis] <= 0) continue;
    box_pass(cur, next, mask.grid.dims, axis, radius[axis], pred);
    cur.swap(next);
  }
  out.voxels = std::move(cur);
  return out;
}

}  // namespace

MaskVolume dilate_box(const MaskVolume& mask, const std::array<int, 3>& radius) {
  return box_filter(mask, radius, [](std::int64_t ones, std::int64_t) { return ones > 0; });
}

MaskVolume erode_box(const MaskVolume& mask, const std::array<int, 3>& radius) {
  return box_filter(mask, radius, [](std::int64_t ones, std::int64_t len) { return ones == len; });
}

MaskVolume close_cube(const MaskVolume& mask, int size) {
  const int r = std::max(0, size / 2);
  return erode_box(dilate_box(mask, {r, r, r}), {r, r, r});
}

}  // namespace lnl

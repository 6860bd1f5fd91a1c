#include "lnl/distance_transform.hpp"

#include <limits>

namespace lnl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D pass over a strided line: d[q] = min_v f[v] + ((q - v) * h)^2.
struct Envelope {
  std::vector<double> f;
  std::vector<std::int64_t> v;
  std::vector<double> z;

  explicit Envelope(std::int64_t n)
      : f(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n)), z(static_cast<std::size_t>(n) + 1) {}

  void run(double* line, std::int64_t n, std::int64_t stride, double h) {
    for (std::int64_t q = 0; q < n; ++q) f[q] = line[q * stride];
    std::int64_t k = -1;
    for (std::int64_t q = 0; q < n; ++q) {
      if (f[q] == kInf) continue;
      if (k < 0) {
        k = 0;
        v[0] = q;
        z[0] = -kInf;
        z[1] = kInf;
        continue;
      }
      const double xq = static_cast<double>(q) * h;
      double s = 0.0;
      while (true) {
        const double xv = static_cast<double>(v[k]) * h;
        s = ((f[q] + xq * xq) - (f[v[k]] + xv * xv)) / (2.0 * (xq - xv));
        if (s <= z[k] && k > 0) {
          --k;
          continue;
        }
        break;
      }
      if (s <= z[k]) {
        // k == 0 and the new parabola dominates everywhere.
        v[0] = q;
        z[1] = kInf;
        continue;
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = kInf;
    }
    if (k < 0) {
      for (std::int64_t q = 0; q < n; ++q) line[q * stride] = kInf;
      return;
    }
    std::int64_t j = 0;
    for (std::int64_t q = 0; q < n; ++q) {
      const double xq = static_cast<double>(q) * h;
      while (z[j + 1] < xq) ++j;
      const double d = static_cast<double>(q - v[j]) * h;
      line[q * stride] = d * d + f[v[j]];
    }
  }
};

}  // namespace

std::vector<double> squared_edt(std::span<const std::uint8_t> seeds, const Index3& dims, const Vec3& spacing) {
  const std::size_t total = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
  std::vector<double> d(total);
  for (std::size_t i = 0; i < total; ++i) d[i] = seeds[i] ? 0.0 : kInf;

  const std::int64_t stride[3] = {1, dims[0], dims[0] * dims[1]};
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t n = dims[axis];
    if (n == 1) continue;
    Envelope env(n);
    const int a1 = axis == 0 ? 1 : 0;
    const int a2 = axis == 2 ? 1 : 2;
    for (std::int64_t c2 = 0; c2 < dims[a2]; ++c2) {
      for (std::int64_t c1 = 0; c1 < dims[a1]; ++c1) {
        const std::int64_t base = c1 * stride[a1] + c2 * stride[a2];
        env.run(d.data() + base, n, stride[axis], spacing[axis]);
      }
    }
  }
  return d;
}

}  // namespace lnl

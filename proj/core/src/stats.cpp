#include "lnl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "lnl/errors.hpp"

namespace lnl::stats {

double quantile7(std::span<const double> values, double p) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

Descriptive descriptive(std::span<const double> values) {
  if (values.empty()) throw DomainError("descriptive statistics of an empty sample");
  Descriptive d;
  d.n = values.size();
  d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  d.median = quantile7(values, 0.5);
  d.q1 = quantile7(values, 0.25);
  d.q3 = quantile7(values, 0.75);
  return d;
}

std::string format_descriptive(const Descriptive& d, int decimals) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "mean %.*f (median %.*f, IQR %.*f \xE2\x80\x93 %.*f)", decimals, d.mean, decimals,
                d.median, decimals, d.q1, decimals, d.q3);
  return buf;
}

void PairedSample::validate() const {
  if (x.size() != y.size()) throw DomainError("paired sample has unequal lengths");
  if (x.empty()) throw DomainError("paired sample is empty");
  if (!case_ids.empty() && case_ids.size() != x.size()) throw DomainError("case ids not aligned with values");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DomainError("paired sample has a missing value");
  }
}

std::string format_result(const TestResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: statistic=%.6g p=%.6g n=%zu%s", r.method.c_str(), r.statistic, r.p_value,
                r.n_effective, r.p_value < kReportAlpha ? " (p < 0.05)" : "");
  std::string s = buf;
  if (!r.notes.empty()) s += " [" + r.notes + "]";
  return s;
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

double tie_term(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double t = static_cast<double>(j - i);
    s += t * t * t - t;
    i = j;
  }
  return s;
}

double normal_two_sided(double deviation, double sd) {
  const double d = std::max(std::abs(deviation) - 0.5, 0.0);
  if (sd <= 0.0) return d > 0.0 ? 0.0 : 1.0;
  return std::min(1.0, std::erfc(d / sd / std::sqrt(2.0)));
}

}  // namespace

TestResult wilcoxon_signed_rank(const PairedSample& s, Mode mode) {
  s.validate();
  std::vector<double> diffs;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const double d = s.x[i] - s.y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  TestResult r;
  r.n_effective = diffs.size();
  const std::size_t zeros = s.x.size() - diffs.size();
  if (diffs.empty()) {
    r.method = "Wilcoxon signed-rank";
    r.statistic = 0.0;
    r.p_value = 1.0;
    r.notes = "all differences zero";
    return r;
  }
  if (zeros > 0) r.notes = std::to_string(zeros) + " zero difference(s) dropped";

  std::vector<double> abs_d(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) abs_d[i] = std::abs(diffs[i]);
  const auto ranks = midranks(abs_d);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0) w_plus += ranks[i];
  }
  r.statistic = w_plus;
  const std::size_t n = diffs.size();

  const bool exact = mode == Mode::exact || (mode == Mode::automatic && n <= kSignedRankExactMaxN);
  if (exact) {
    if (n > 62) throw DomainError("exact signed-rank enumeration supports at most 62 non-zero differences");
    // Doubled mid-ranks are integers; count sign assignments by their positive-rank sum.
    std::vector<std::int64_t> r2(n);
    std::int64_t total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r2[i] = std::llround(2.0 * ranks[i]);
      total2 += r2[i];
    }
    std::vector<std::uint64_t> ways(static_cast<std::size_t>(total2) + 1, 0);
    ways[0] = 1;
    std::int64_t reach = 0;
    for (auto v : r2) {
      for (std::int64_t t = reach; t >= 0; --t) {
        if (ways[t]) ways[t + v] += ways[t];
      }
      reach += v;
    }
    const std::int64_t obs2 = std::llround(2.0 * w_plus);
    const std::int64_t dev = std::llabs(2 * obs2 - total2);
    std::uint64_t extreme = 0;
    for (std::int64_t t = 0; t <= total2; ++t) {
      if (std::llabs(2 * t - total2) >= dev) extreme += ways[t];
    }
    r.p_value = static_cast<double>(extreme) / std::ldexp(1.0, static_cast<int>(n));
    r.method = "Wilcoxon signed-rank (exact)";
    return r;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term(abs_d) / 48.0;
  r.p_value = normal_two_sided(w_plus - mean, std::sqrt(var));
  r.method = "Wilcoxon signed-rank (normal approximation)";
  return r;
}

TestResult wilcoxon_rank_sum(std::span<const double> x, std::span<const double> y, Mode mode) {
  if (x.empty() || y.empty()) throw DomainError("rank-sum test needs two non-empty samples");
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  for (double v : pooled) {
    if (!std::isfinite(v)) throw DomainError("rank-sum sample has a missing value");
  }
  const auto ranks = midranks(pooled);
  const std::size_t m = x.size(), n = y.size(), total = m + n;
  double r1 = 0.0;
  for (std::size_t i = 0; i < m; ++i) r1 += ranks[i];
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  const double u = r1 - md * (md + 1.0) / 2.0;

  TestResult r;
  r.statistic = u;
  r.n_effective = total;
  const double ties = tie_term(pooled);
  const bool exact = mode == Mode::exact || (mode == Mode::automatic && total <= kRankSumExactMaxN && ties == 0.0);
  if (exact) {
    if (ties != 0.0) throw DomainError("exact rank-sum enumeration requires untied data");
    if (total > 60) throw DomainError("exact rank-sum enumeration supports at most 60 observations");
    // ways[c][s]: subsets of size c from ranks 1..N with rank sum s.
    const std::size_t max_sum = total * (total + 1) / 2;
    std::vector<std::vector<std::uint64_t>> ways(m + 1, std::vector<std::uint64_t>(max_sum + 1, 0));
    ways[0][0] = 1;
    for (std::size_t rank = 1; rank <= total; ++rank) {
      for (std::size_t c = std::min(m, rank); c >= 1; --c) {
        for (std::size_t s = max_sum; s >= rank; --s) ways[c][s] += ways[c - 1][s - rank];
      }
    }
    const double offset = md * (md + 1.0) / 2.0;
    const double dev = std::abs(2.0 * u - md * nd);
    std::uint64_t extreme = 0, all = 0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
      if (!ways[m][s]) continue;
      all += ways[m][s];
      const double us = static_cast<double>(s) - offset;
      if (std::abs(2.0 * us - md * nd) >= dev) extreme += ways[m][s];
    }
    r.p_value = static_cast<double>(extreme) / static_cast<double>(all);
    r.method = "Wilcoxon rank-sum (exact)";
    return r;
  }

  const double tn = static_cast<double>(total);
  const double var = md * nd / 12.0 * ((tn + 1.0) - ties / (tn * (tn - 1.0)));
  r.p_value = normal_two_sided(u - md * nd / 2.0, std::sqrt(std::max(var, 0.0)));
  r.method = "Wilcoxon rank-sum (normal approximation)";
  if (ties != 0.0) r.notes = "tie-corrected variance";
  return r;
}

TestResult paired_levene(const PairedSample& s) {
  s.validate();
  const std::size_t n = s.x.size();
  if (n < 3) throw DomainError("paired Levene test needs at least 3 pairs");
  const double mx = quantile7(s.x, 0.5);
  const double my = quantile7(s.y, 0.5);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = std::abs(s.x[i] - mx) - std::abs(s.y[i] - my);
  const double nd = static_cast<double>(n);
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / nd;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (nd - 1.0));

  TestResult r;
  r.method = "paired Levene / Brown-Forsythe (paired t on absolute median deviations)";
  r.n_effective = n;
  if (sd == 0.0) {
    r.statistic = mean == 0.0 ? 0.0 : std::copysign(INFINITY, mean);
    r.p_value = mean == 0.0 ? 1.0 : 0.0;
    r.notes = "zero variance of paired deviation differences";
    return r;
  }
  const double t = mean / (sd / std::sqrt(nd));
  r.statistic = t;
  const boost::math::students_t dist(nd - 1.0);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
  return r;
}

}  // namespace lnl::stats

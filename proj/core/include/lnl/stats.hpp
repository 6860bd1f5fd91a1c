#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lnl::stats {

struct Descriptive {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

/// Mean plus type-7 (linear interpolation) median and quartiles. Throws DomainError on empty input.
Descriptive descriptive(std::span<const double> values);
double quantile7(std::span<const double> values, double p);

/// "mean 79.6 (median 80.7, IQR 77.3 – 82.2)" with the given number of decimals.
std::string format_descriptive(const Descriptive& d, int decimals);

struct PairedSample {
  std::vector<std::string> case_ids;  // optional; empty or aligned with x/y
  std::vector<double> x;
  std::vector<double> y;

  void validate() const;
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
  std::size_t n_effective = 0;
  std::string notes;
};

/// Annotates, never decides: "significant" iff p < alpha.
inline constexpr double kReportAlpha = 0.05;
std::string format_result(const TestResult& r);

enum class Mode { automatic, exact, approx };

inline constexpr std::size_t kSignedRankExactMaxN = 20;
inline constexpr std::size_t kRankSumExactMaxN = 16;

/// Mid-ranks (1-based) of `values`.
std::vector<double> midranks(std::span<const double> values);

/// Paired two-sided Wilcoxon signed-rank test on d = x - y. Zero differences are
/// dropped, ties get mid-ranks. The statistic is W+ (sum of ranks of positive
/// differences). Exact null distribution (all 2^n sign assignments) when the effective
/// n <= 20 in automatic mode; otherwise normal approximation with tie and continuity
/// correction.
TestResult wilcoxon_signed_rank(const PairedSample& s, Mode mode = Mode::automatic);

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test. The statistic is U for x. Exact
/// (enumerating rank subsets) when m + n <= 16 with no ties in automatic mode, otherwise
/// normal approximation with tie and continuity correction.
TestResult wilcoxon_rank_sum(std::span<const double> x, std::span<const double> y, Mode mode = Mode::automatic);

/// Paired Brown-Forsythe dispersion test: paired t-test (n-1 df) on
/// |x_i - median(x)| - |y_i - median(y)|. Statistic is t. Needs n >= 3.
TestResult paired_levene(const PairedSample& s);

}  // namespace lnl::stats

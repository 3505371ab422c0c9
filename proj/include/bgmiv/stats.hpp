#pragma once

#include <vector>

namespace bgmiv::stats {

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  bool degenerate = false;  // zero-variance differences
};

// One-sample t test of the paired differences against zero, two-sided.
// Zero-variance nonzero-mean diffs report p = 0 with the degenerate flag;
// all-zero diffs report p = 1 with the flag.
TTestResult paired_t_test(const std::vector<double>& diffs);

struct WilcoxonResult {
  double statistic = 0.0;  // W+, the positive-rank sum
  double p = 1.0;
  long n_used = 0;  // nonzero differences entering the test
};

// Exact two-sided signed-rank test. Zeros dropped, tied magnitudes receive
// average ranks, and the null distribution is enumerated exactly (via the
// rank-sum generating polynomial).
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs);

// Step-down Holm adjustment, returned in the original order.
std::vector<double> holm_adjust(const std::vector<double>& pvalues);

// Two-sided Student-t p via the regularized incomplete beta function.
double t_two_sided_p(double t, long dof);
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace bgmiv::stats

#include "bgmiv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bgmiv::stats {

namespace {

// Lentz continued fraction for the incomplete beta (the classic betacf form).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16, kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double t_two_sided_p(double t, long dof) {
  if (dof < 1) throw std::invalid_argument("t_two_sided_p: dof must be >= 1");
  const double v = static_cast<double>(dof);
  return regularized_incomplete_beta(v / 2.0, 0.5, v / (v + t * t));
}

TTestResult paired_t_test(const std::vector<double>& diffs) {
  const long n = static_cast<long>(diffs.size());
  if (n < 2) throw std::invalid_argument("paired_t_test: need at least 2 differences");
  const double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / (n - 1));

  TTestResult r;
  if (sd == 0.0) {
    r.degenerate = true;
    r.t = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity() * (mean > 0 ? 1.0 : -1.0);
    r.p = mean == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = t_two_sided_p(r.t, n - 1);
  return r;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs) {
  std::vector<double> nz;
  for (double d : diffs)
    if (d != 0.0) nz.push_back(d);
  const long n = static_cast<long>(nz.size());
  if (n == 0) throw std::invalid_argument("wilcoxon_signed_rank: all differences are zero");

  // average ranks of |d|
  std::vector<long> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](long a, long b) { return std::abs(nz[a]) < std::abs(nz[b]); });
  std::vector<double> rank(n);
  for (long i = 0; i < n;) {
    long j = i;
    while (j + 1 < n && std::abs(nz[idx[j + 1]]) == std::abs(nz[idx[i]])) ++j;
    const double avg = (i + j) / 2.0 + 1.0;
    for (long k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }

  double w_plus = 0.0;
  for (long i = 0; i < n; ++i)
    if (nz[i] > 0.0) w_plus += rank[i];

  // exact null distribution over doubled ranks (integers even with .5 ties)
  std::vector<long> r2(n);
  long total = 0;
  for (long i = 0; i < n; ++i) {
    const double d2 = 2.0 * rank[i];
    r2[i] = static_cast<long>(std::llround(d2));
    total += r2[i];
  }
  std::vector<double> ways(total + 1, 0.0);
  ways[0] = 1.0;
  for (long i = 0; i < n; ++i)
    for (long s = total; s >= r2[i]; --s) ways[s] += ways[s - r2[i]];

  const double denom = std::pow(2.0, static_cast<double>(n));
  const long w2 = static_cast<long>(std::llround(2.0 * w_plus));
  double le = 0.0, ge = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (s <= w2) le += ways[s];
    if (s >= w2) ge += ways[s];
  }
  WilcoxonResult r;
  r.statistic = w_plus;
  r.n_used = n;
  r.p = std::min(1.0, 2.0 * std::min(le, ge) / denom);
  return r;
}

std::vector<double> holm_adjust(const std::vector<double>& pvalues) {
  const long m = static_cast<long>(pvalues.size());
  for (double p : pvalues)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("holm_adjust: p outside [0,1]");
  std::vector<long> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](long a, long b) { return pvalues[a] < pvalues[b]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (long i = 0; i < m; ++i) {
    const double scaled = std::min(1.0, (m - i) * pvalues[idx[i]]);
    running = std::max(running, scaled);
    adjusted[idx[i]] = running;
  }
  return adjusted;
}

}  // namespace bgmiv::stats

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace tcfbm {

/// Pairwise summation in a fixed order over [lo, hi).
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Sample mean and standard error of the mean.
inline Estimate mean_se(const double* x, std::size_t n) {
  Estimate e;
  e.n = n;
  if (n == 0) return e;
  e.mean = pairwise_sum(x, n) / static_cast<double>(n);
  if (n < 2) return e;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = (x[i] - e.mean) * (x[i] - e.mean);
  double var = pairwise_sum(d) / static_cast<double>(n - 1);
  e.se = std::sqrt(var / static_cast<double>(n));
  return e;
}

inline Estimate mean_se(const std::vector<double>& x) { return mean_se(x.data(), x.size()); }

/**
 * @brief Doubling-stabilization test for heavy-tailed means.
 *
 * Compares running means at n/8, n/4, n/2, n. A comparison fails when the two means differ
 * by more than 5 standard errors of the larger sample; three consecutive failures, or any
 * non-finite sample, flag divergence.
 */
struct DivergenceCheck {
  bool diverged = false;
  std::size_t failures = 0;
  std::vector<double> checkpoint_means;
};

inline DivergenceCheck doubling_test(const std::vector<double>& x) {
  DivergenceCheck out;
  for (double v : x)
    if (!std::isfinite(v)) {
      out.diverged = true;
      out.failures = 3;
      return out;
    }
  const std::size_t n = x.size();
  if (n < 64) return out;
  std::size_t run = 0;
  Estimate prev = mean_se(x.data(), n / 8);
  out.checkpoint_means.push_back(prev.mean);
  for (std::size_t m : {n / 4, n / 2, n}) {
    Estimate cur = mean_se(x.data(), m);
    out.checkpoint_means.push_back(cur.mean);
    bool fail = std::abs(cur.mean - prev.mean) > 5.0 * cur.se;
    if (fail) {
      ++run;
      ++out.failures;
    } else {
      run = 0;
    }
    prev = cur;
  }
  out.diverged = run >= 3;
  return out;
}

/// Least-squares slope and intercept of y on x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace tcfbm

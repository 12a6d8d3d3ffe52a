#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <numbers>

#include "tcfbm/error.hpp"

namespace tcfbm {

/**
 * @brief Hurst parameter.
 *
 * The default constructor range is (0, 1/2). `kernel_only` also admits (1/2, 1).
 */
class HurstExponent {
 public:
  explicit HurstExponent(double h) : value_(h) {
    if (!(h > 0.0 && h < 0.5))
      throw DomainError("Hurst exponent must lie in (0,1/2), got " + std::to_string(h));
  }

  static HurstExponent kernel_only(double h) {
    if (!(h > 0.0 && h < 1.0) || h == 0.5)
      throw DomainError("kernel Hurst exponent must lie in (0,1/2) or (1/2,1), got " + std::to_string(h));
    HurstExponent e;
    e.value_ = h;
    return e;
  }

  double value() const { return value_; }
  operator double() const { return value_; }
  bool in_theorem_range() const { return value_ > 0.0 && value_ < 0.5; }

 private:
  HurstExponent() = default;
  double value_ = 0.25;
};

namespace detail {

inline bool is_nonpositive_integer(double x) { return x <= 0.0 && x == std::floor(x); }

// Lanczos, g = 7, n = 9.
inline double lanczos_gamma_positive(double x) {
  static constexpr double g = 7.0;
  static constexpr double p[9] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                  771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                  -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  double z = x - 1.0;
  double a = p[0];
  const double t = z + g + 0.5;
  for (int i = 1; i < 9; ++i) a += p[i] / (z + static_cast<double>(i));
  double half = std::pow(t, 0.5 * (z + 0.5));
  return std::sqrt(2.0 * std::numbers::pi) * half * (half * std::exp(-t)) * a;
}

}  // namespace detail

/// Γ(x) for any real x that is not a pole; reflection below 1/2.
inline double gamma_reflect(double x) {
  if (detail::is_nonpositive_integer(x)) throw DomainError("Gamma pole at nonpositive integer");
  if (x < 0.5) return std::numbers::pi / (std::sin(std::numbers::pi * x) * detail::lanczos_gamma_positive(1.0 - x));
  return detail::lanczos_gamma_positive(x);
}

/// 1/Γ(x), zero at the poles.
inline double rgamma(double x) {
  if (detail::is_nonpositive_integer(x)) return 0.0;
  return 1.0 / gamma_reflect(x);
}

/// Γ(x) for x > 0.
inline double gamma_fn(double x) {
  if (!(x > 0.0)) throw DomainError("gamma_fn requires x > 0");
  return gamma_reflect(x);
}

/// B(a,b) = Γ(a)Γ(b)/Γ(a+b).
inline double beta_fn(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("beta_fn requires positive arguments");
  // symmetric evaluation order keeps B(a,b) == B(b,a) bitwise
  double lo = std::min(a, b), hi = std::max(a, b);
  return gamma_fn(lo) * (gamma_fn(hi) / gamma_fn(lo + hi));
}

/**
 * @brief Direct Gauss series for |x| < 1.
 *
 * Stops once the next term is below 1e-16 of the partial sum; 10,000-term cap.
 */
inline double hyp2f1_series(double a, double b, double c, double x) {
  if (detail::is_nonpositive_integer(c)) throw DomainError("hyp2f1: c is a nonpositive integer");
  if (!(std::abs(x) < 1.0)) throw DomainError("hyp2f1_series needs |x| < 1");
  double sum = 1.0, term = 1.0;
  for (int n = 0; n < 10000; ++n) {
    const double dn = n;
    term *= (a + dn) * (b + dn) / ((c + dn) * (dn + 1.0)) * x;
    sum += term;
    if (term == 0.0) return sum;
    const double next_ratio = std::abs((a + dn + 1.0) * (b + dn + 1.0) / ((c + dn + 1.0) * (dn + 2.0)) * x);
    if (next_ratio < 1.0 && std::abs(term) * next_ratio <= 1e-16 * std::abs(sum)) return sum;
  }
  throw NonConvergenceError("hyp2f1 series did not converge within 10000 terms");
}

/**
 * @brief ₂F₁(a,b;c;z) for z ≤ 0.
 *
 * Pfaff maps z to w = z/(z−1) in [0,1). Past w = 0.75 the 1−w connection formula is used
 * unless b−a is within 1e-6 of an integer, in which case the capped series runs.
 */
inline double hyp2f1(double a, double b, double c, double z) {
  if (detail::is_nonpositive_integer(c)) throw DomainError("hyp2f1: c is a nonpositive integer");
  if (!(z <= 0.0)) throw DomainError("hyp2f1: only z <= 0 is supported");
  if (z == 0.0 || a == 0.0 || b == 0.0) return 1.0;
  if (detail::is_nonpositive_integer(a) || detail::is_nonpositive_integer(b)) {
    if (z > -1.0) return hyp2f1_series(a, b, c, z);
  }
  const double w = z / (z - 1.0);
  const double pre = std::pow(1.0 - z, -a);
  const double b2 = c - b;
  if (w <= 0.75 || detail::is_nonpositive_integer(a) || detail::is_nonpositive_integer(b2))
    return pre * hyp2f1_series(a, b2, c, w);
  const double d = c - a - b2;
  if (std::abs(d - std::round(d)) < 1e-6) return pre * hyp2f1_series(a, b2, c, w);
  const double s = 1.0 / (1.0 - z);
  const double gc = gamma_reflect(c);
  const double t1 = gc * gamma_reflect(d) * rgamma(c - a) * rgamma(c - b2) * hyp2f1_series(a, b2, 1.0 - d, s);
  const double t2 = std::pow(s, d) * gc * gamma_reflect(-d) * rgamma(a) * rgamma(b2) *
                    hyp2f1_series(c - a, c - b2, 1.0 + d, s);
  return pre * (t1 + t2);
}

/// B(3/2−H, 1/2−H)/Γ(1/2−H).
inline double kernel_constant(HurstExponent H) {
  if (!H.in_theorem_range()) throw DomainError("kernel_constant requires H in (0,1/2)");
  return beta_fn(1.5 - H, 0.5 - H) / gamma_fn(0.5 - H);
}

/// Θ_H = kernel_constant(H)² / (4(1−H)).
inline double theta_h(HurstExponent H) {
  if (!H.in_theorem_range()) throw DomainError("theta_h requires H in (0,1/2)");
  const double k = kernel_constant(H);
  return k * k / (4.0 * (1.0 - H));
}

}  // namespace tcfbm

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tcfbm/error.hpp"

namespace tcfbm {

using ScalarFn = std::function<double(double)>;

namespace detail {
// Mapped to [0,1] first: Boost compares the unscaled error with a scaled tolerance.
inline double gk(const ScalarFn& f, double a, double b, double tol = 1e-12) {
  if (a == b) return 0.0;
  const double h = b - a;
  auto g = [&](double u) { return f(a + h * u); };
  return h * boost::math::quadrature::gauss_kronrod<double, 21>::integrate(g, 0.0, 1.0, 12, tol);
}
}  // namespace detail

/// K(t) = ∫₀^t k(s) ds.
inline double k_integral(const ScalarFn& k, double t) {
  require(t >= 0.0, "k_integral requires t >= 0");
  return detail::gk(k, 0.0, t);
}

/**
 * @brief K tabulated on [0, horizon] and interpolated by cubic Hermite (K' = k is known).
 */
class KProfile {
 public:
  KProfile() : KProfile([](double) { return 0.0; }, 1.0, 1) {}

  KProfile(ScalarFn k, double horizon, std::size_t cells = 2048) : k_(std::move(k)), horizon_(horizon) {
    require(horizon > 0.0 && cells >= 1, "KProfile needs a positive horizon");
    h_ = horizon / static_cast<double>(cells);
    K_.assign(cells + 1, 0.0);
    kv_.assign(cells + 1, 0.0);
    kv_[0] = k_(0.0);
    for (std::size_t i = 1; i <= cells; ++i) {
      K_[i] = K_[i - 1] + detail::gk(k_, h_ * static_cast<double>(i - 1), h_ * static_cast<double>(i));
      kv_[i] = k_(h_ * static_cast<double>(i));
      require(std::isfinite(K_[i]) && std::isfinite(kv_[i]), "k must be locally bounded");
    }
  }

  double horizon() const { return horizon_; }
  double k(double t) const { return k_(t); }
  const ScalarFn& k_fn() const { return k_; }

  double K(double t) const {
    if (t <= 0.0) return 0.0;
    if (t > horizon_ * (1.0 + 1e-12)) throw RangeError("KProfile queried past its horizon");
    const std::size_t n = K_.size() - 1;
    std::size_t i = std::min(n - 1, static_cast<std::size_t>(t / h_));
    const double s = (t - h_ * static_cast<double>(i)) / h_;
    const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s;
    const double h01 = -2 * s * s * s + 3 * s * s, h11 = s * s * s - s * s;
    return h00 * K_[i] + h10 * h_ * kv_[i] + h01 * K_[i + 1] + h11 * h_ * kv_[i + 1];
  }

  /// sup over the table nodes and a 4× refinement.
  double sup_K(double T) const {
    double best = 0.0;
    const std::size_t steps = 4 * (K_.size() - 1);
    for (std::size_t i = 0; i <= steps; ++i) {
      const double t = T * static_cast<double>(i) / static_cast<double>(steps);
      best = std::max(best, K(t));
    }
    return best;
  }

 private:
  ScalarFn k_;
  double horizon_, h_;
  std::vector<double> K_, kv_;
};

/// K*(T) = exp[2 sup_{t≤T} K(t)].
inline double k_star(const ScalarFn& k, double T, std::size_t cells = 1024) {
  require(T >= 0.0, "k_star requires T >= 0");
  if (T == 0.0) return 1.0;
  KProfile p(k, T, cells);
  return std::exp(2.0 * p.sup_K(T));
}

/**
 * @brief Modulus u for the Yamada–Watanabe certificate.
 *
 * linear: u(s) = c·s. xlog: u(s) = s·log(e ∨ 1/s). table: piecewise linear through
 * (s_i, u_i), continued linearly beyond the last point and by u_0·s/s_0 below the first.
 */
struct UFunction {
  enum class Kind { linear, xlog, table };
  Kind kind = Kind::linear;
  double c = 1.0;
  std::vector<double> s, u;

  static UFunction linear(double c = 1.0) {
    UFunction f;
    f.kind = Kind::linear;
    f.c = c;
    return f;
  }
  static UFunction xlog() {
    UFunction f;
    f.kind = Kind::xlog;
    return f;
  }
  static UFunction table(std::vector<double> s, std::vector<double> u) {
    UFunction f;
    f.kind = Kind::table;
    require(s.size() >= 2 && s.size() == u.size(), "u table needs matching columns with at least two rows");
    for (std::size_t i = 0; i < s.size(); ++i) {
      require(s[i] > 0.0 && u[i] > 0.0, "u table entries must be positive");
      if (i) require(s[i] > s[i - 1], "u table abscissae must increase");
    }
    f.s = std::move(s);
    f.u = std::move(u);
    return f;
  }

  double operator()(double x) const {
    if (x <= 0.0) return 0.0;
    switch (kind) {
      case Kind::linear:
        return c * x;
      case Kind::xlog:
        return x * std::max(1.0, -std::log(x));
      case Kind::table: {
        if (x <= s.front()) return u.front() * x / s.front();
        if (x >= s.back()) {
          const double sl = (u.back() - u[u.size() - 2]) / (s.back() - s[s.size() - 2]);
          return u.back() + sl * (x - s.back());
        }
        const std::size_t i = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) - 1;
        const double w = (x - s[i]) / (s[i + 1] - s[i]);
        return u[i] + w * (u[i + 1] - u[i]);
      }
    }
    return 0.0;
  }

  bool is_linear() const { return kind == Kind::linear; }
};

/// Numerical screening of class membership: continuity, monotonicity, linear growth, ∫_{0+} ds/u = ∞.
struct ClassUReport {
  bool ok = true;
  std::string reason;
  std::vector<double> decade_increments;
};

inline double g_u(const UFunction& u, double r);

inline ClassUReport check_class_u(const UFunction& u, int max_decades = 12) {
  ClassUReport rep;
  double prev = 0.0;
  for (int i = -1200; i <= 600; ++i) {
    const double x = std::pow(10.0, i / 100.0);
    const double v = u(x);
    if (!(v > 0.0) || !std::isfinite(v)) {
      rep.ok = false;
      rep.reason = "u must be positive and finite on (0,inf)";
      return rep;
    }
    if (v < prev * (1.0 - 1e-12)) {
      rep.ok = false;
      rep.reason = "u must be nondecreasing";
      return rep;
    }
    prev = v;
  }
  const double growth_lo = u(1.0), growth_hi = u(1e6) / 1e6;
  if (growth_hi > 10.0 * std::max(growth_lo, u(10.0) / 10.0)) {
    rep.ok = false;
    rep.reason = "u must grow at most linearly";
    return rep;
  }
  auto inv = [&](double v) {
    const double x = std::exp(v);
    return x / u(x);
  };
  for (int k = 1; k <= max_decades; ++k) {
    const double a = -std::log(10.0) * k, b = -std::log(10.0) * (k - 1);
    rep.decade_increments.push_back(detail::gk(inv, a, b, 1e-10));
  }
  const auto& d = rep.decade_increments;
  const double last = d.back(), before = d[d.size() - 2];
  if (!(last > 0.0) || last / before < 0.9) {
    rep.ok = false;
    rep.reason = "partial integrals of 1/u from 10^-k to 1 appear to converge";
  }
  return rep;
}

/// G_u(r) = −∫_r^1 ds/u(s) for r < 1 and ∫_1^r ds/u(s) otherwise.
inline double g_u(const UFunction& u, double r) {
  if (!(r > 0.0)) throw DomainError("g_u requires r > 0 (G_u(0+) = -inf)");
  if (u.is_linear()) return std::log(r) / u.c;
  const double v = std::log(r);
  if (u.kind == UFunction::Kind::xlog) return v >= -1.0 ? v : -1.0 - std::log(-v);
  auto f = [&](double w) {
    const double x = std::exp(w);
    return x / u(x);
  };
  return detail::gk(f, 0.0, v);
}

/// G_u^{-1}(y): closed form for linear and xlog, otherwise safeguarded Newton in log r.
inline double g_u_inverse(const UFunction& u, double y) {
  if (u.is_linear()) return std::exp(u.c * y);
  if (u.kind == UFunction::Kind::xlog) return y >= -1.0 ? std::exp(y) : std::exp(-std::exp(-1.0 - y));
  auto G = [&](double v) { return g_u(u, std::exp(v)); };
  double lo = -1.0, hi = 1.0;
  int guard = 0;
  while (G(lo) > y) {
    lo *= 2.0;
    if (++guard > 12) throw NonConvergenceError("g_u_inverse: target below the reachable range");
  }
  guard = 0;
  while (G(hi) < y) {
    hi *= 2.0;
    if (++guard > 12) throw NonConvergenceError("g_u_inverse: target above the reachable range");
  }
  double v = 0.5 * (lo + hi);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
    const double g = G(v) - y;
    if (g == 0.0) return std::exp(v);
    if (g < 0.0)
      lo = v;
    else
      hi = v;
    const double x = std::exp(v);
    double vn = v - g * u(x) / x;
    if (!(vn > lo && vn < hi)) vn = 0.5 * (lo + hi);
    if (std::abs(vn - v) <= 1e-15 * std::max(1.0, std::abs(v))) return std::exp(vn);
    v = vn;
  }
  return std::exp(v);
}

/// Φ_{u,k}(t,r) = r + ∫₀^t k(s)·u(G_u^{-1}(G_u(r) + K(s))) ds.
inline double phi_uk(const UFunction& u, const KProfile& K, double t, double r) {
  require(t >= 0.0 && r >= 0.0, "phi_uk requires t, r >= 0");
  if (t == 0.0 || r == 0.0) return r;
  const double g0 = g_u(u, r);
  auto f = [&](double s) {
    const double ks = K.k(s);
    if (ks == 0.0) return 0.0;
    return ks * u(g_u_inverse(u, g0 + K.K(s)));
  };
  return r + detail::gk(f, 0.0, t, 1e-10);
}

/// Bihari envelope G_u^{-1}(G_u(r) + K(s)).
inline double bihari_envelope(const UFunction& u, const KProfile& K, double r, double s) {
  if (r == 0.0) return 0.0;
  return g_u_inverse(u, g_u(u, r) + K.K(s));
}

}  // namespace tcfbm

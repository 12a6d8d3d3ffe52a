#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tcfbm/error.hpp"
#include "tcfbm/frac_kernel.hpp"
#include "tcfbm/grid.hpp"
#include "tcfbm/rng.hpp"

namespace tcfbm {

enum class JumpLaw { exponential, deterministic };

/**
 * @brief Laplace exponent φ(r) = ϑr + c_s r^α + a·log(1+r/b) + λ∫(1−e^{−rx})F(dx).
 *
 * Jump law parameter: mean for exponential jumps, size for deterministic ones.
 */
struct BernsteinSpec {
  double drift = 0.0;
  double stable_alpha = 0.5;
  double stable_scale = 0.0;
  double gamma_shape = 0.0;
  double gamma_rate = 1.0;
  double cp_rate = 0.0;
  JumpLaw cp_law = JumpLaw::exponential;
  double cp_jump = 1.0;

  static BernsteinSpec pure_drift(double rate) {
    BernsteinSpec s;
    s.drift = rate;
    return s;
  }
  static BernsteinSpec stable(double alpha, double scale = 1.0) {
    BernsteinSpec s;
    s.stable_alpha = alpha;
    s.stable_scale = scale;
    return s;
  }
  static BernsteinSpec gamma(double shape, double rate) {
    BernsteinSpec s;
    s.gamma_shape = shape;
    s.gamma_rate = rate;
    return s;
  }

  void validate() const {
    require(drift >= 0.0, "Bernstein drift must be nonnegative");
    require(stable_scale >= 0.0, "stable scale must be nonnegative");
    require(stable_alpha > 0.0 && stable_alpha < 1.0, "stable index must lie in (0,1)");
    require(gamma_shape >= 0.0, "gamma shape must be nonnegative");
    require(gamma_rate > 0.0, "gamma rate must be positive");
    require(cp_rate >= 0.0, "compound Poisson rate must be nonnegative");
    require(cp_jump > 0.0, "jump law parameter must be positive");
    require(drift > 0.0 || stable_scale > 0.0 || gamma_shape > 0.0 || cp_rate > 0.0,
            "Bernstein function needs at least one active component");
  }

  bool strictly_increasing() const { return drift > 0.0 || stable_scale > 0.0 || gamma_shape > 0.0; }

  bool pure_drift_only() const { return stable_scale == 0.0 && gamma_shape == 0.0 && cp_rate == 0.0; }
};

inline double phi_eval(const BernsteinSpec& s, double r) {
  if (!(r > 0.0)) throw DomainError("phi_eval requires r > 0");
  double v = s.drift * r;
  if (s.stable_scale > 0.0) v += s.stable_scale * std::pow(r, s.stable_alpha);
  if (s.gamma_shape > 0.0) v += s.gamma_shape * std::log1p(r / s.gamma_rate);
  if (s.cp_rate > 0.0) {
    if (s.cp_law == JumpLaw::exponential)
      v += s.cp_rate * r * s.cp_jump / (1.0 + r * s.cp_jump);
    else
      v += -s.cp_rate * std::expm1(-r * s.cp_jump);
  }
  return v;
}

/// Nondecreasing path starting at 0, sampled on a grid.
struct TimeChangePath {
  TimeGrid grid;
  std::vector<double> values;

  double at(double t) const {
    const auto& p = grid.points();
    if (t <= 0.0) return values.front();
    if (t >= p.back()) {
      if (t > p.back() * (1.0 + 1e-12)) throw RangeError("time-change queried past its horizon");
      return values.back();
    }
    const std::size_t i = grid.cell_of(t);
    const double w = (t - p[i]) / (p[i + 1] - p[i]);
    return values[i] + w * (values[i + 1] - values[i]);
  }
};

/// Positive stable variable with E e^{−rS} = e^{−r^α} (Kanter's representation).
template <class Gen>
double positive_stable(double alpha, Gen& gen) {
  std::uniform_real_distribution<double> U(0.0, std::numbers::pi);
  std::exponential_distribution<double> E(1.0);
  double u = U(gen);
  while (u <= 0.0) u = U(gen);
  const double e = E(gen);
  const double a = std::sin(alpha * u) / std::pow(std::sin(u), 1.0 / alpha);
  const double b = std::pow(std::sin((1.0 - alpha) * u) / e, (1.0 - alpha) / alpha);
  return a * b;
}

/// One increment of the subordinator over a cell of length dt.
template <class Gen>
double subordinator_increment(const BernsteinSpec& s, double dt, Gen& gen) {
  double inc = s.drift * dt;
  if (s.stable_scale > 0.0) inc += std::pow(s.stable_scale * dt, 1.0 / s.stable_alpha) * positive_stable(s.stable_alpha, gen);
  if (s.gamma_shape > 0.0) {
    std::gamma_distribution<double> G(s.gamma_shape * dt, 1.0 / s.gamma_rate);
    inc += G(gen);
  }
  if (s.cp_rate > 0.0) {
    std::poisson_distribution<long> P(s.cp_rate * dt);
    const long k = P(gen);
    for (long i = 0; i < k; ++i) {
      if (s.cp_law == JumpLaw::exponential) {
        std::exponential_distribution<double> J(1.0 / s.cp_jump);
        inc += J(gen);
      } else {
        inc += s.cp_jump;
      }
    }
  }
  return inc;
}

template <class Gen>
TimeChangePath sample_subordinator(const BernsteinSpec& spec, const TimeGrid& grid, Gen& gen) {
  spec.validate();
  TimeChangePath p{grid, std::vector<double>(grid.size(), 0.0)};
  const auto& t = grid.points();
  for (std::size_t i = 1; i < t.size(); ++i) p.values[i] = p.values[i - 1] + subordinator_increment(spec, t[i] - t[i - 1], gen);
  return p;
}

inline TimeChangePath sample_subordinator(const BernsteinSpec& spec, const TimeGrid& grid, std::uint64_t seed,
                                          std::uint64_t index = 0) {
  Rng rng(seed, Stream::clock, index);
  return sample_subordinator(spec, grid, rng);
}

/**
 * @brief S^{-1}(t) = inf{s : S(s) > t} at the query times.
 *
 * Linear interpolation inside the crossing cell; plateaus of S^{-1} appear across jumps of S.
 */
inline std::vector<double> invert_path(const TimeChangePath& S, const std::vector<double>& query) {
  const auto& s = S.grid.points();
  std::vector<double> out(query.size());
  for (std::size_t q = 0; q < query.size(); ++q) {
    const double t = query[q];
    require(t >= 0.0, "invert_path query times must be nonnegative");
    if (t > S.values.back()) throw RangeError("invert_path: query beyond S(end); extend the horizon");
    auto it = std::upper_bound(S.values.begin(), S.values.end(), t);
    if (it == S.values.end()) {
      out[q] = s.back();
      continue;
    }
    const std::size_t i = static_cast<std::size_t>(it - S.values.begin());
    if (i == 0) {
      out[q] = 0.0;
      continue;
    }
    const double lo = S.values[i - 1], hi = S.values[i];
    out[q] = s[i - 1] + (t - lo) / (hi - lo) * (s[i] - s[i - 1]);
  }
  return out;
}

inline TimeChangePath invert_path(const TimeChangePath& S, const TimeGrid& query) {
  return TimeChangePath{query, invert_path(S, query.points())};
}

/// Mesh for simulate-then-invert: geometric from `first_cell`, then uniform at `max_cell`.
struct InverseClockOptions {
  double first_cell = 1e-10;
  double ratio = 1.05;
  double max_cell = 2e-3;
  std::size_t max_cells = 50'000'000;
};

/**
 * @brief Inverse subordinator at the query times by simulating S until it exceeds the last query.
 *
 * The first mesh cell is the truncation level below which S^{-1} is not resolved.
 */
template <class Gen>
TimeChangePath sample_inverse_subordinator(const BernsteinSpec& spec, const TimeGrid& query, Gen& gen,
                                           const InverseClockOptions& opt = {}) {
  spec.validate();
  if (!spec.strictly_increasing())
    throw DomainError("inverse subordinator needs a strictly increasing subordinator (drift, stable or gamma part)");
  const double horizon = query.back();
  std::vector<double> s{0.0}, v{0.0};
  double cell = opt.first_cell;
  while (v.back() <= horizon) {
    if (s.size() > opt.max_cells) throw RangeError("inverse subordinator: mesh budget exhausted before horizon");
    const double dt = std::min(cell, opt.max_cell);
    s.push_back(s.back() + dt);
    v.push_back(v.back() + subordinator_increment(spec, dt, gen));
    cell *= opt.ratio;
  }
  TimeChangePath S{TimeGrid(std::move(s)), std::move(v)};
  return invert_path(S, query);
}

/**
 * @brief ℓ_ε(t) = (1/ε)∫_t^{t+ε} ℓ + εt for piecewise-linear ℓ, with its inverse γ_ε.
 */
class RegularizedClock {
 public:
  RegularizedClock(const TimeChangePath& l, double eps) : l_(l), eps_(eps) {
    require(eps > 0.0 && eps < 1.0, "regularization needs eps in (0,1)");
    const auto& t = l_.grid.points();
    for (std::size_t i = 1; i < l_.values.size(); ++i)
      require(l_.values[i] >= l_.values[i - 1], "time-change must be nondecreasing");
    cum_.assign(t.size(), 0.0);
    for (std::size_t i = 1; i < t.size(); ++i)
      cum_[i] = cum_[i - 1] + 0.5 * (l_.values[i] + l_.values[i - 1]) * (t[i] - t[i - 1]);
  }

  double eps() const { return eps_; }
  /// Largest t at which ℓ_ε is defined.
  double horizon() const { return l_.grid.back() - eps_; }
  const TimeChangePath& base() const { return l_; }

  double operator()(double t) const {
    check(t);
    return (integral_to(t + eps_) - integral_to(t)) / eps_ + eps_ * t;
  }

  double derivative(double t) const {
    check(t);
    return (l_.at(t + eps_) - l_.at(t)) / eps_ + eps_;
  }

  /// γ_ε(y) by safeguarded Newton inside a bisection bracket.
  double inverse(double y, double lo_hint = 0.0) const {
    double lo = std::max(0.0, lo_hint), hi = horizon();
    const double ylo = (*this)(lo), yhi = (*this)(hi);
    if (y < (*this)(0.0) - 1e-12 * std::max(1.0, std::abs(y)) || y > yhi + 1e-12 * std::max(1.0, std::abs(y)))
      throw RangeError("inverse_of_regularized: value outside [l_eps(0), l_eps(end)]");
    if (y <= ylo) return lo;
    if (y >= yhi) return hi;
    double x = lo + (y - ylo) / (yhi - ylo) * (hi - lo);
    for (int it = 0; it < 200; ++it) {
      const double f = (*this)(x) - y;
      if (std::abs(f) <= 1e-13 * std::max(1.0, std::abs(y))) return x;
      if (f > 0.0)
        hi = x;
      else
        lo = x;
      double xn = x - f / derivative(x);
      if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
      x = xn;
      if (hi - lo <= 1e-15 * std::max(1.0, hi)) return x;
    }
    return x;
  }

  /// Breakpoints of ℓ_ε' inside [a,b]: grid points and grid points shifted by −ε.
  std::vector<double> breakpoints(double a, double b) const {
    const auto& t = l_.grid.points();
    std::vector<double> bp{a, b};
    auto add_from = [&](double shift) {
      auto it = std::upper_bound(t.begin(), t.end(), a + shift);
      for (; it != t.end() && *it - shift < b; ++it) bp.push_back(*it - shift);
    };
    add_from(0.0);
    add_from(eps_);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    return bp;
  }

 private:
  void check(double t) const {
    if (t < 0.0 || t > horizon() * (1.0 + 1e-12))
      throw RangeError("regularized clock queried outside [0, horizon - eps]; extend the horizon");
  }

  double integral_to(double x) const {
    const auto& t = l_.grid.points();
    if (x >= t.back()) return cum_.back();
    const std::size_t i = l_.grid.cell_of(x);
    const double h = x - t[i];
    const double slope = (l_.values[i + 1] - l_.values[i]) / (t[i + 1] - t[i]);
    return cum_[i] + l_.values[i] * h + 0.5 * slope * h * h;
  }

  TimeChangePath l_;
  double eps_;
  std::vector<double> cum_;
};

/// ℓ_ε sampled on a grid, as a plain path.
inline TimeChangePath regularize(const TimeChangePath& l, double eps, const TimeGrid& out) {
  RegularizedClock c(l, eps);
  TimeChangePath p{out, std::vector<double>(out.size())};
  for (std::size_t i = 0; i < out.size(); ++i) p.values[i] = c(out[i]);
  return p;
}

}  // namespace tcfbm

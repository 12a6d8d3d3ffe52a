#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tcfbm/error.hpp"
#include "tcfbm/function.hpp"
#include "tcfbm/kcalc.hpp"
#include "tcfbm/parallel.hpp"
#include "tcfbm/rng.hpp"
#include "tcfbm/sde.hpp"
#include "tcfbm/specfun.hpp"
#include "tcfbm/stats.hpp"
#include "tcfbm/timechange.hpp"

namespace tcfbm {

enum class InequalityKind { log, power, gradient };

inline const char* to_string(InequalityKind k) {
  switch (k) {
    case InequalityKind::log:
      return "log";
    case InequalityKind::power:
      return "power";
    case InequalityKind::gradient:
      return "gradient";
  }
  return "?";
}

inline const char* inverse_clock_refusal() {
  return "power-Harnack refused: for an inverse subordinator clock E exp[delta / Z(t)^theta] is infinite "
         "for every delta, theta > 0, so no finite power-Harnack factor exists";
}

struct HarnackOptions {
  std::size_t n_paths = 50000;
  std::size_t n_z_samples = 50000;
  std::size_t steps = 64;     ///< SDE grid cells on [0, T]
  std::size_t z_cells = 256;  ///< Z grid cells for the Stieltjes sum when k is not identically zero
  std::size_t threads = 0;
  std::uint64_t seed = 1;
  double fd_step = 1e-3;
  SolverOptions solver{1e-5, 24};
};

/// Left- and right-point sums of ∫₀^T e^{−K} dZ over the sampled increments of Z.
struct StieltjesSums {
  double left = 0.0;
  double right = 0.0;
};

inline StieltjesSums stieltjes_sums(const TimeChangePath& Z, const KProfile& K) {
  StieltjesSums s;
  const auto& t = Z.grid.points();
  for (std::size_t j = 0; j + 1 < t.size(); ++j) {
    const double dz = Z.values[j + 1] - Z.values[j];
    if (dz == 0.0) continue;
    s.left += std::exp(-K.K(t[j])) * dz;
    s.right += std::exp(-K.K(t[j + 1])) * dz;
  }
  return s;
}

namespace detail {

inline bool identically_zero(const ScalarFn& k, double T) {
  for (int i = 0; i <= 256; ++i)
    if (k(T * i / 256.0) != 0.0) return false;
  return true;
}

inline std::uint64_t z_seed(std::uint64_t seed) { return derive_seed(seed, Stream::z_factor); }

/**
 * @brief Draws of q = Z(T)^{2−2H}/(∫₀^T e^{−K} dZ)² for one isotropic clock.
 *
 * With k ≡ 0 the integral is Z(T) and one exact increment suffices.
 */
class ZRatioSampler {
 public:
  ZRatioSampler(const ClockSpec& clock, double H, const ScalarFn& k, double T, std::size_t cells)
      : clock_(clock), H_(H), T_(T), kzero_(identically_zero(k, T)), K_(k, T, 256) {
    require(T > 0.0, "horizon must be positive");
    clock_.validate();
    grid_ = TimeGrid::uniform(T, kzero_ ? 1 : cells);
    if (!clock_.random()) {
      Rng unused(0);
      const auto z = clock_.sample(grid_, unused);
      const double zt = z.values.back();
      double exact = zt;
      if (!kzero_) {
        std::vector<double> bp{0.0, T};
        for (double s : clock_.table_t)
          if (s > 0.0 && s < T) bp.push_back(s);
        std::sort(bp.begin(), bp.end());
        exact = 0.0;
        auto e = [&](double t) { return std::exp(-K_.K(t)); };
        for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
          const double slope = (clock_.deterministic_at(bp[i + 1]) - clock_.deterministic_at(bp[i])) / (bp[i + 1] - bp[i]);
          if (slope != 0.0) exact += slope * gk(e, bp[i], bp[i + 1]);
        }
      }
      const auto sums = kzero_ ? StieltjesSums{zt, zt} : stieltjes_sums(z, K_);
      fixed_left_ = ratio(zt, exact);
      fixed_right_ = ratio(zt, sums.right);
      fixed_grid_left_ = ratio(zt, sums.left);
    }
  }

  bool deterministic() const { return !clock_.random(); }
  const KProfile& profile() const { return K_; }

  /// {left, right} ratios for draw `index`.
  std::pair<double, double> draw(std::uint64_t seed, std::uint64_t index) const {
    if (deterministic()) return {fixed_left_, fixed_right_};
    Rng rng(seed, Stream::clock, index);
    const auto z = clock_.sample(grid_, rng);
    const double zt = z.values.back();
    if (kzero_) {
      const double q = ratio(zt, zt);
      return {q, q};
    }
    const auto s = stieltjes_sums(z, K_);
    return {ratio(zt, s.left), ratio(zt, s.right)};
  }

  /// Grid left-point value for deterministic clocks, for the convention gap.
  double fixed_grid_left() const { return fixed_grid_left_; }

 private:
  double ratio(double zt, double s) const {
    if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
    return std::pow(zt, 2.0 - 2.0 * H_) / (s * s);
  }

  ClockSpec clock_;
  double H_, T_;
  bool kzero_;
  KProfile K_;
  TimeGrid grid_;
  double fixed_left_ = 0.0, fixed_right_ = 0.0, fixed_grid_left_ = 0.0;
};

inline void require_isotropic(const NoiseModel& m, const DriftSpec& drift) {
  m.validate();
  require(!m.anisotropic(), "isotropic bounds need one Hurst index and one clock");
  require(drift.osl() != nullptr, "isotropic bounds need a one-sided Lipschitz certificate");
  require(m.dim == drift.dim, "model and drift dimensions differ");
}

inline void require_anisotropic(const NoiseModel& m, const DriftSpec& drift) {
  m.validate();
  require(drift.yw() != nullptr, "anisotropic bounds need a Yamada-Watanabe certificate");
  require(m.dim == drift.dim, "model and drift dimensions differ");
}

inline double sq_dist(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "x and y dimensions differ");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s;
}

inline double l1_dist(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "x and y dimensions differ");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s;
}

}  // namespace detail

/**
 * @brief The Z-expectation factor E[Z(T)^{2−2H}/(∫₀^T e^{−K} dZ)²] with its sample.
 */
struct ExpectationFactor {
  Estimate value;
  double right_point = 0.0;     ///< same expectation with right-point sums
  double convention_gap = 0.0;  ///< |right − left|
  bool deterministic = false;
  DivergenceCheck divergence;
  std::vector<double> samples;  ///< left-point draws (one entry for deterministic clocks)
};

inline ExpectationFactor expectation_factor(const NoiseModel& model, const DriftSpec& drift, double T,
                                            const HarnackOptions& opt) {
  detail::require_isotropic(model, drift);
  const double H = model.H(0);
  HurstExponent check(H);
  detail::ZRatioSampler zs(model.clock(0), H, drift.k(), T, opt.z_cells);
  ExpectationFactor f;
  f.deterministic = zs.deterministic();
  if (f.deterministic) {
    const auto q = zs.draw(0, 0);
    f.value = Estimate{q.first, 0.0, 1};
    f.right_point = q.second;
    f.convention_gap = std::abs(q.second - zs.fixed_grid_left());
    f.samples = {q.first};
    f.divergence.diverged = !std::isfinite(q.first);
    return f;
  }
  require(opt.n_z_samples >= 64, "n_z_samples must be at least 64");
  const std::uint64_t seed = detail::z_seed(opt.seed);
  std::vector<double> left(opt.n_z_samples), right(opt.n_z_samples);
  parallel_for(opt.n_z_samples, opt.threads, [&](std::size_t i) {
    const auto q = zs.draw(seed, i);
    left[i] = q.first;
    right[i] = q.second;
  });
  f.divergence = doubling_test(left);
  f.value = mean_se(left);
  f.right_point = mean_se(right).mean;
  f.convention_gap = std::abs(f.right_point - f.value.mean);
  f.samples = std::move(left);
  return f;
}

/**
 * @brief A bound or factor with its constant decomposition.
 *
 * value = theta·expectation·displacement for log and gradient types; for power factors
 * value = (E exp[…])^{p−1} and `exp_moment` holds the inner expectation.
 */
struct HarnackBound {
  double value = 0.0;
  double se = 0.0;
  bool diverged = false;
  std::string message;
  double theta = 0.0;                 ///< Θ_H, or ΣΘ_{H_i}
  std::vector<double> theta_i;        ///< per coordinate (anisotropic)
  Estimate expectation;               ///< Z factor, normalized so that value = theta·E·displacement
  std::vector<Estimate> expectation_i;  ///< E[Z_i(T)^{−2H_i}] (anisotropic)
  double displacement = 0.0;          ///< |x−y|², Φ²_{u,k}(T,‖x−y‖₁), or the gradient prefactor
  Estimate exp_moment;                ///< power factors only
  double convention_gap = 0.0;
  DivergenceCheck divergence;
};

namespace detail {

inline HarnackBound linear_bound(const ExpectationFactor& f, double theta, double displacement) {
  HarnackBound b;
  b.theta = theta;
  b.expectation = f.value;
  b.displacement = displacement;
  b.convention_gap = theta * f.convention_gap * displacement;
  b.divergence = f.divergence;
  if (f.divergence.diverged) {
    b.diverged = true;
    b.message = "Z-expectation factor failed the doubling-stabilization test";
    b.value = std::numeric_limits<double>::infinity();
    b.se = std::numeric_limits<double>::infinity();
    return b;
  }
  b.value = theta * f.value.mean * displacement;
  b.se = theta * f.value.se * displacement;
  return b;
}

inline HarnackBound power_from_samples(const std::vector<double>& q, double c, double p, bool deterministic) {
  HarnackBound b;
  std::vector<double> e(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) e[i] = c == 0.0 ? 1.0 : std::exp(c * q[i]);
  b.exp_moment = deterministic ? Estimate{e[0], 0.0, 1} : mean_se(e);
  b.divergence = deterministic ? DivergenceCheck{!std::isfinite(e[0]), 0, {}} : doubling_test(e);
  if (b.divergence.diverged || !std::isfinite(b.exp_moment.mean)) {
    b.diverged = true;
    b.message = "exponential moment failed the doubling-stabilization test";
    b.value = std::numeric_limits<double>::infinity();
    b.se = std::numeric_limits<double>::infinity();
    return b;
  }
  const double m = b.exp_moment.mean;
  b.value = std::pow(m, p - 1.0);
  b.se = (p - 1.0) * std::pow(m, p - 2.0) * b.exp_moment.se;
  return b;
}

}  // namespace detail

/// Θ_H·E[Z(T)^{2−2H}/(∫e^{−K}dZ)²]; shared by the log and gradient bounds.
inline HarnackBound log_harnack_coefficient(const NoiseModel& model, const DriftSpec& drift, double T,
                                            const HarnackOptions& opt) {
  const auto f = expectation_factor(model, drift, T, opt);
  return detail::linear_bound(f, theta_h(HurstExponent(model.H(0))), 1.0);
}

/// Θ_H·E[Z(T)^{2−2H}/(∫₀^T e^{−K} dZ)²]·|x−y|².
inline HarnackBound log_harnack_bound(const NoiseModel& model, const DriftSpec& drift, double T,
                                      const std::vector<double>& x, const std::vector<double>& y,
                                      const HarnackOptions& opt) {
  require(x.size() == model.dim, "x has the wrong dimension");
  const double d2 = detail::sq_dist(x, y);
  HarnackBound b = log_harnack_coefficient(model, drift, T, opt);
  b.displacement = d2;
  if (!b.diverged) {
    b.value *= d2;
    b.se *= d2;
  }
  b.convention_gap *= d2;
  return b;
}

/// 2Θ_H·E[Z(T)^{2−2H}/(∫₀^T e^{−K} dZ)²], the factor multiplying P_T f² − (P_T f)².
inline HarnackBound gradient_bound(const NoiseModel& model, const DriftSpec& drift, double T, const HarnackOptions& opt) {
  HarnackBound b = log_harnack_coefficient(model, drift, T, opt);
  b.displacement = 2.0;
  if (!b.diverged) {
    b.value *= 2.0;
    b.se *= 2.0;
  }
  b.convention_gap *= 2.0;
  return b;
}

/**
 * @brief (E exp[pΘ_H/(p−1)²·Z(T)^{2−2H}|x−y|²/(∫e^{−K}dZ)²])^{p−1}.
 *
 * Inverse subordinator clocks are refused outright; other clocks go through the doubling test.
 */
inline HarnackBound power_harnack_factor(const NoiseModel& model, const DriftSpec& drift, double T,
                                         const std::vector<double>& x, const std::vector<double>& y, double p,
                                         const HarnackOptions& opt) {
  require(p > 1.0, "power-Harnack needs p > 1");
  detail::require_isotropic(model, drift);
  require(x.size() == model.dim, "x has the wrong dimension");
  const double d2 = detail::sq_dist(x, y);
  const double theta = theta_h(HurstExponent(model.H(0)));
  if (d2 == 0.0) {
    HarnackBound b;
    b.value = 1.0;
    b.theta = theta;
    b.exp_moment = Estimate{1.0, 0.0, 1};
    return b;
  }
  if (model.any_inverse_clock()) {
    HarnackBound b;
    b.theta = theta;
    b.displacement = d2;
    b.diverged = true;
    b.message = inverse_clock_refusal();
    b.value = b.se = std::numeric_limits<double>::infinity();
    return b;
  }
  const auto f = expectation_factor(model, drift, T, opt);
  const double c = p * theta / ((p - 1.0) * (p - 1.0)) * d2;
  HarnackBound b = detail::power_from_samples(f.samples, c, p, f.deterministic);
  b.theta = theta;
  b.expectation = f.value;
  b.displacement = d2;
  b.convention_gap = f.convention_gap;
  if (!f.deterministic && f.divergence.diverged && !b.diverged) {
    b.diverged = true;
    b.message = "Z-expectation factor failed the doubling-stabilization test";
  }
  return b;
}

/// Log, power and gradient bounds for the anisotropic equation with a Yamada–Watanabe certificate.
struct AnisotropicBounds {
  HarnackBound log;
  std::optional<HarnackBound> power;
  std::optional<HarnackBound> gradient;  ///< only when u(s) = c·s
  double phi = 0.0;                      ///< Φ_{u,k}(T, ‖x−y‖₁)
};

namespace detail {

/// Draws of ΣΘ_{H_i}·Z^{(i)}(T)^{−2H_i} plus per-coordinate Z^{(i)}(T)^{−2H_i}.
struct AnisotropicSample {
  std::vector<double> total;
  std::vector<std::vector<double>> coord;
  bool deterministic = false;
};

inline AnisotropicSample anisotropic_sample(const NoiseModel& m, double T, const HarnackOptions& opt) {
  const std::size_t d = m.dim;
  AnisotropicSample s;
  s.deterministic = m.deterministic_clocks();
  const std::size_t n = s.deterministic ? 1 : opt.n_z_samples;
  require(s.deterministic || n >= 64, "n_z_samples must be at least 64");
  s.total.assign(n, 0.0);
  s.coord.assign(d, std::vector<double>(n, 0.0));
  const TimeGrid g = TimeGrid::uniform(T, 1);
  const std::uint64_t seed = z_seed(opt.seed);
  std::vector<double> theta(d);
  for (std::size_t i = 0; i < d; ++i) theta[i] = theta_h(HurstExponent(m.H(i)));
  parallel_for(n, opt.threads, [&](std::size_t j) {
    std::vector<double> zt(m.clocks.size());
    for (std::size_t c = 0; c < m.clocks.size(); ++c) {
      Rng rng(seed, clock_stream(m, c), j);
      zt[c] = m.clocks[c].sample(g, rng).values.back();
    }
    double tot = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double z = zt[m.shared_clock() ? 0 : i];
      const double v = z > 0.0 ? std::pow(z, -2.0 * m.H(i)) : std::numeric_limits<double>::infinity();
      s.coord[i][j] = v;
      tot += theta[i] * v;
    }
    s.total[j] = tot;
  });
  return s;
}

}  // namespace detail

inline AnisotropicBounds anisotropic_bounds(const NoiseModel& model, const DriftSpec& drift, double T,
                                            const std::vector<double>& x, const std::vector<double>& y,
                                            std::optional<double> p, const HarnackOptions& opt) {
  detail::require_anisotropic(model, drift);
  require(T > 0.0, "horizon must be positive");
  require(x.size() == model.dim, "x has the wrong dimension");
  const auto& cert = *drift.yw();
  const KProfile K(cert.k, T, 256);
  AnisotropicBounds out;
  out.phi = phi_uk(cert.u, K, T, detail::l1_dist(x, y));
  const double phi2 = out.phi * out.phi;

  const auto s = detail::anisotropic_sample(model, T, opt);
  double theta_sum = 0.0;
  std::vector<double> theta_i(model.dim);
  for (std::size_t i = 0; i < model.dim; ++i) {
    theta_i[i] = theta_h(HurstExponent(model.H(i)));
    theta_sum += theta_i[i];
  }
  ExpectationFactor f;
  f.deterministic = s.deterministic;
  std::vector<double> normalized(s.total.size());
  for (std::size_t j = 0; j < s.total.size(); ++j) normalized[j] = s.total[j] / theta_sum;
  f.value = s.deterministic ? Estimate{normalized[0], 0.0, 1} : mean_se(normalized);
  f.divergence = s.deterministic ? DivergenceCheck{!std::isfinite(normalized[0]), 0, {}} : doubling_test(normalized);
  std::vector<Estimate> per;
  for (const auto& c : s.coord) per.push_back(s.deterministic ? Estimate{c[0], 0.0, 1} : mean_se(c));

  out.log = detail::linear_bound(f, theta_sum, phi2);
  out.log.theta_i = theta_i;
  out.log.expectation_i = per;

  if (p) {
    require(*p > 1.0, "power-Harnack needs p > 1");
    HarnackBound b;
    if (phi2 == 0.0) {
      b.value = 1.0;
      b.exp_moment = Estimate{1.0, 0.0, 1};
    } else if (model.any_inverse_clock()) {
      b.diverged = true;
      b.message = inverse_clock_refusal();
      b.value = b.se = std::numeric_limits<double>::infinity();
    } else {
      const double c = *p / ((*p - 1.0) * (*p - 1.0)) * phi2;
      b = detail::power_from_samples(s.total, c, *p, s.deterministic);
    }
    b.theta = theta_sum;
    b.theta_i = theta_i;
    b.expectation = f.value;
    b.expectation_i = per;
    b.displacement = phi2;
    out.power = b;
  }

  if (cert.u.is_linear()) {
    const double g = phi_uk(cert.u, K, T, 1.0);
    HarnackBound b = detail::linear_bound(f, theta_sum, 2.0 * g * g);
    b.theta_i = theta_i;
    b.expectation_i = per;
    out.gradient = b;
  }
  return out;
}

/// Outcome of a numerical liminf/limsup screen of φ(r)r^{−ρ}.
struct IndexCheck {
  bool holds = false;
  double slope = 0.0;  ///< log-log slope of φ(r)r^{−ρ} over the probed decades
};

namespace detail {

inline double log_slope(const BernsteinSpec& s, double rho, double lo_exp, double hi_exp) {
  std::vector<double> lx, ly;
  for (int i = 0; i <= 40; ++i) {
    const double e = lo_exp + (hi_exp - lo_exp) * i / 40.0;
    const double r = std::pow(10.0, e);
    lx.push_back(std::log(r));
    ly.push_back(std::log(phi_eval(s, r)) - rho * std::log(r));
  }
  return least_squares(lx, ly).slope;
}

constexpr double kSlopeTol = 0.01;

}  // namespace detail

/// liminf_{r→∞} φ(r)r^{−ρ} > 0, screened on r ∈ [1e8, 1e14].
inline IndexCheck liminf_at_infinity(const BernsteinSpec& s, double rho) {
  const double sl = detail::log_slope(s, rho, 8.0, 14.0);
  return {sl >= -detail::kSlopeTol, sl};
}

/// liminf_{r↓0} φ(r)r^{−ρ} > 0, screened on r ∈ [1e-14, 1e-8].
inline IndexCheck liminf_at_zero(const BernsteinSpec& s, double rho) {
  const double sl = detail::log_slope(s, rho, -14.0, -8.0);
  return {sl <= detail::kSlopeTol, sl};
}

/// limsup_{r→∞} φ(r)r^{−σ} < ∞.
inline IndexCheck limsup_at_infinity(const BernsteinSpec& s, double sigma) {
  const double sl = detail::log_slope(s, sigma, 8.0, 14.0);
  return {sl <= detail::kSlopeTol, sl};
}

/// limsup_{r↓0} φ(r)r^{−σ} < ∞.
inline IndexCheck limsup_at_zero(const BernsteinSpec& s, double sigma) {
  const double sl = detail::log_slope(s, sigma, -14.0, -8.0);
  return {sl >= -detail::kSlopeTol, sl};
}

enum class ClockFamily { subordinator, inverse_subordinator };

/**
 * @brief Predicted T-scaling exponents of the Harnack constants.
 *
 * Isotropic subordinator: `small_time` = `large_time` = 2H/ρ. Inverse: 2Hσ. Anisotropic
 * subordinators: κ₂ (small T) and κ₁ (large T); inverse: κ₄ and κ₃. `global` is false when
 * only the T∧1 form is available.
 */
struct ExponentSchedule {
  ClockFamily family = ClockFamily::subordinator;
  bool anisotropic = false;
  double small_time = 0.0;
  double large_time = 0.0;
  bool global = true;
  std::vector<double> power_secondary;  ///< 2H_i/(ρ_i − 2H_i(1−ρ_i)) where ρ_i > 2H_i/(1+2H_i)
  bool power_available = false;
};

inline ExponentSchedule corollary_exponents(const std::vector<BernsteinSpec>& specs, const std::vector<double>& hurst,
                                            const std::vector<double>& index, ClockFamily family) {
  const std::size_t d = hurst.size();
  require(d >= 1 && specs.size() == d && index.size() == d, "one Bernstein function, Hurst index and regime index per coordinate");
  ExponentSchedule out;
  out.family = family;
  out.anisotropic = d > 1;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  out.power_available = family == ClockFamily::subordinator;
  for (std::size_t i = 0; i < d; ++i) {
    HurstExponent H(hurst[i]);
    const double r = index[i];
    require(r > 0.0, "regime index must be positive");
    specs[i].validate();
    double e = 0.0;
    if (family == ClockFamily::subordinator) {
      const auto inf = liminf_at_infinity(specs[i], r);
      if (!inf.holds)
        throw HypothesisViolation("liminf_{r->inf} phi(r) r^-" + std::to_string(r) +
                                  " > 0 fails numerically (log-log slope " + std::to_string(inf.slope) + ")");
      if (!liminf_at_zero(specs[i], r).holds) out.global = false;
      e = 2.0 * H / r;
      if (r > 2.0 * H / (1.0 + 2.0 * H))
        out.power_secondary.push_back(2.0 * H / (r - 2.0 * H * (1.0 - r)));
      else
        out.power_available = false;
    } else {
      const auto a = limsup_at_zero(specs[i], r), b = limsup_at_infinity(specs[i], r);
      if (!a.holds || !b.holds)
        throw HypothesisViolation("limsup phi(r) r^-" + std::to_string(r) + " < inf fails numerically at " +
                                  (a.holds ? "infinity" : "zero"));
      if (!specs[i].strictly_increasing()) throw HypothesisViolation("inverse subordinator needs a strictly increasing S");
      e = 2.0 * H * r;
    }
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  out.small_time = hi;
  out.large_time = lo;
  if (!out.power_available) out.power_secondary.clear();
  return out;
}

/// (1/(1−θ))·[2cΓ(σ+1)]^θ·t^{−σθ}, an upper bound for E[(S^{-1}(t))^{−θ}] when φ(r) ≤ c·r^σ.
inline double inverse_moment_bound(double sigma, double theta, double c, double t) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("inverse_moment_bound requires theta in (0,1)");
  require(sigma > 0.0 && c > 0.0 && t > 0.0, "inverse_moment_bound requires sigma, c, t > 0");
  return std::pow(2.0 * c * gamma_fn(sigma + 1.0), theta) * std::pow(t, -sigma * theta) / (1.0 - theta);
}

/// Monte Carlo verification record of one inequality.
struct HarnackReport {
  InequalityKind kind = InequalityKind::log;
  bool anisotropic = false;
  Estimate lhs;
  Estimate rhs_expectation;  ///< P_T f(x) (log), P_T f^p(x) (power), variance (gradient)
  HarnackBound bound;
  double rhs = 0.0;
  double rhs_se = 0.0;
  double combined_se = 0.0;
  double margin = 0.0;
  bool pass = false;
  bool diverged = false;
  std::string message;
  double T = 0.0;
  double p = 0.0;
  std::vector<double> x, y;
  std::size_t n_paths = 0;
  std::size_t n_z_samples = 0;
  std::uint64_t seed = 0, lhs_seed = 0, rhs_seed = 0, z_seed = 0;
};

namespace detail {

inline MonteCarloOptions mc(const HarnackOptions& o, std::uint64_t seed) {
  MonteCarloOptions m;
  m.steps = o.steps;
  m.n_paths = o.n_paths;
  m.seed = seed;
  m.threads = o.threads;
  m.solver = o.solver;
  return m;
}

inline std::vector<double> f_values(const FunctionDescriptor& f, const std::vector<double>& x, double T,
                                    const NoiseModel& model, const DriftSpec& drift, const MonteCarloOptions& opt) {
  const auto xt = terminal_states(x, T, model, drift, opt);
  std::vector<double> v(opt.n_paths);
  for (std::size_t i = 0; i < opt.n_paths; ++i) v[i] = f(&xt[i * drift.dim]);
  return v;
}

}  // namespace detail

/**
 * @brief Estimates both sides of an inequality on disjoint seed streams.
 *
 * The one-sided Lipschitz certificate selects the isotropic statements and the Yamada–Watanabe
 * certificate the anisotropic ones. pass iff lhs ≤ rhs + 3·combined SE.
 */
inline HarnackReport verify_inequality(InequalityKind kind, const FunctionDescriptor& f_in, const std::vector<double>& x,
                                       const std::vector<double>& y, double T, double p, const NoiseModel& model,
                                       const DriftSpec& drift, const HarnackOptions& opt) {
  require(T > 0.0, "horizon must be positive");
  require(x.size() == model.dim && y.size() == model.dim, "x and y must have the model dimension");
  require(opt.n_paths >= 100, "verify_inequality needs at least 100 paths");
  FunctionDescriptor f = f_in;
  f.bind_dimension(model.dim);
  switch (kind) {
    case InequalityKind::log:
      f.require_range(1.0, "log-Harnack");
      break;
    case InequalityKind::power:
      f.require_range(0.0, "power-Harnack");
      require(p > 1.0, "power-Harnack needs p > 1");
      break;
    case InequalityKind::gradient:
      f.require_range(-std::numeric_limits<double>::infinity(), "gradient estimate");
      break;
  }

  HarnackReport r;
  r.kind = kind;
  r.anisotropic = drift.yw() != nullptr;
  r.T = T;
  r.p = kind == InequalityKind::power ? p : 0.0;
  r.x = x;
  r.y = kind == InequalityKind::gradient ? x : y;
  r.n_paths = opt.n_paths;
  r.n_z_samples = opt.n_z_samples;
  r.seed = opt.seed;
  r.lhs_seed = derive_seed(opt.seed, Stream::lhs);
  r.rhs_seed = derive_seed(opt.seed, Stream::rhs);
  r.z_seed = detail::z_seed(opt.seed);

  if (r.anisotropic) {
    auto ab = anisotropic_bounds(model, drift, T, x, y, kind == InequalityKind::power ? std::optional<double>(p) : std::nullopt, opt);
    if (kind == InequalityKind::log) r.bound = ab.log;
    if (kind == InequalityKind::power) r.bound = *ab.power;
    if (kind == InequalityKind::gradient) {
      if (!ab.gradient) throw DomainError("anisotropic gradient estimate needs u(s) = c*s");
      r.bound = *ab.gradient;
    }
  } else {
    detail::require_isotropic(model, drift);
    if (kind == InequalityKind::log) r.bound = log_harnack_bound(model, drift, T, x, y, opt);
    if (kind == InequalityKind::power) r.bound = power_harnack_factor(model, drift, T, x, y, p, opt);
    if (kind == InequalityKind::gradient) r.bound = gradient_bound(model, drift, T, opt);
  }
  if (r.bound.diverged) {
    r.diverged = true;
    r.message = r.bound.message;
    r.rhs = r.rhs_se = r.combined_se = r.margin = std::numeric_limits<double>::quiet_NaN();
    return r;
  }

  const auto lo = detail::mc(opt, r.lhs_seed), ro = detail::mc(opt, r.rhs_seed);
  switch (kind) {
    case InequalityKind::log: {
      const auto lv = detail::f_values(FunctionDescriptor::log(f), y, T, model, drift, lo);
      r.lhs = mean_se(lv);
      const auto rv = detail::f_values(f, x, T, model, drift, ro);
      r.rhs_expectation = mean_se(rv);
      const double m = r.rhs_expectation.mean;
      r.rhs = std::log(m) + r.bound.value;
      r.rhs_se = std::hypot(r.rhs_expectation.se / m, r.bound.se);
      break;
    }
    case InequalityKind::power: {
      const auto lv = detail::f_values(f, y, T, model, drift, lo);
      const auto e = mean_se(lv);
      r.lhs = Estimate{std::pow(e.mean, p), p * std::pow(e.mean, p - 1.0) * e.se, e.n};
      std::vector<double> rv = detail::f_values(f, x, T, model, drift, ro);
      for (auto& v : rv) v = std::pow(v, p);
      r.rhs_expectation = mean_se(rv);
      r.rhs = r.rhs_expectation.mean * r.bound.value;
      r.rhs_se = std::hypot(r.rhs_expectation.se * r.bound.value, r.rhs_expectation.mean * r.bound.se);
      break;
    }
    case InequalityKind::gradient: {
      const std::size_t d = model.dim;
      std::vector<Estimate> g(d);
      for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> e(d, 0.0);
        e[k] = 1.0;
        g[k] = estimate_gradient(f, x, e, opt.fd_step, T, model, drift, lo).slope;
      }
      if (r.anisotropic) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < d; ++k)
          if (std::abs(g[k].mean) > std::abs(g[best].mean)) best = k;
        r.lhs = Estimate{g[best].mean * g[best].mean, 2.0 * std::abs(g[best].mean) * g[best].se, g[best].n};
      } else {
        double s = 0.0, v = 0.0;
        for (const auto& gk : g) {
          s += gk.mean * gk.mean;
          v += 4.0 * gk.mean * gk.mean * gk.se * gk.se;
        }
        r.lhs = Estimate{s, std::sqrt(v), g[0].n};
      }
      const auto rv = detail::f_values(f, x, T, model, drift, ro);
      const auto m = mean_se(rv);
      const double n = static_cast<double>(rv.size());
      double m2 = 0.0, m4 = 0.0;
      for (double v : rv) {
        const double c = v - m.mean;
        m2 += c * c;
        m4 += c * c * c * c;
      }
      m2 /= n;
      m4 /= n;
      const double var = m2 * n / (n - 1.0);
      r.rhs_expectation = Estimate{var, std::sqrt(std::max(0.0, m4 - m2 * m2) / n), rv.size()};
      r.rhs = var * r.bound.value;
      r.rhs_se = std::hypot(r.rhs_expectation.se * r.bound.value, var * r.bound.se);
      break;
    }
  }
  r.combined_se = std::hypot(r.lhs.se, r.rhs_se);
  r.margin = r.rhs - r.lhs.mean;
  r.pass = r.lhs.mean <= r.rhs + 3.0 * r.combined_se;
  return r;
}

}  // namespace tcfbm

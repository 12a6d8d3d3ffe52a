#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "tcfbm/error.hpp"
#include "tcfbm/fbm.hpp"
#include "tcfbm/function.hpp"
#include "tcfbm/grid.hpp"
#include "tcfbm/kcalc.hpp"
#include "tcfbm/parallel.hpp"
#include "tcfbm/rng.hpp"
#include "tcfbm/stats.hpp"
#include "tcfbm/timechange.hpp"

namespace tcfbm {

/// b(t, x) written into out; x and out have the drift dimension.
using DriftFn = std::function<void(double t, const double* x, double* out)>;

/// ⟨b(x)−b(y), x−y⟩ ≤ k(t)|x−y|².
struct OneSidedLipschitz {
  ScalarFn k;
};

/// ‖b(x)−b(y)‖₁ ≤ k(t)·u(‖x−y‖₁), k ≥ 0.
struct YamadaWatanabe {
  UFunction u;
  ScalarFn k;
};

struct DriftSpec {
  std::size_t dim = 1;
  DriftFn b;
  std::variant<OneSidedLipschitz, YamadaWatanabe> certificate;
  std::string name = "custom";
  bool zero = false;            ///< b ≡ 0, lets solvers skip integration
  bool coordinatewise = false;  ///< b^{(i)} depends on x^{(i)} only

  const OneSidedLipschitz* osl() const { return std::get_if<OneSidedLipschitz>(&certificate); }
  const YamadaWatanabe* yw() const { return std::get_if<YamadaWatanabe>(&certificate); }

  const ScalarFn& k() const { return osl() ? osl()->k : yw()->k; }

  /// Checks the certificate on [0, horizon]; throws DomainError.
  void validate(double horizon) const {
    require(dim >= 1, "drift dimension must be at least 1");
    require(static_cast<bool>(b), "drift function missing");
    for (int i = 0; i <= 256; ++i) {
      const double t = horizon * i / 256.0;
      const double kv = k()(t);
      require(std::isfinite(kv), "certificate k must be finite on the horizon");
      if (yw()) require(kv >= 0.0, "Yamada-Watanabe k must be nonnegative");
    }
    if (yw()) {
      const auto rep = check_class_u(yw()->u);
      if (!rep.ok) throw DomainError("u is not in class U: " + rep.reason);
    }
  }
};

inline ScalarFn constant_fn(double c) {
  return [c](double) { return c; };
}

enum class Certificate { one_sided, yamada_watanabe };

inline DriftSpec zero_drift(std::size_t d, Certificate c = Certificate::one_sided) {
  DriftSpec s;
  s.dim = d;
  s.b = [d](double, const double*, double* out) { std::fill(out, out + d, 0.0); };
  if (c == Certificate::one_sided)
    s.certificate = OneSidedLipschitz{constant_fn(0.0)};
  else
    s.certificate = YamadaWatanabe{UFunction::linear(1.0), constant_fn(0.0)};
  s.name = "zero";
  s.zero = true;
  s.coordinatewise = true;
  return s;
}

/// b(x) = −λx; one-sided with k = −λ, or Yamada–Watanabe with u(s)=s, k = |λ|.
inline DriftSpec linear_drift(std::size_t d, double lambda, Certificate c = Certificate::one_sided) {
  DriftSpec s;
  s.dim = d;
  s.b = [d, lambda](double, const double* x, double* out) {
    for (std::size_t i = 0; i < d; ++i) out[i] = -lambda * x[i];
  };
  if (c == Certificate::one_sided)
    s.certificate = OneSidedLipschitz{constant_fn(-lambda)};
  else
    s.certificate = YamadaWatanabe{UFunction::linear(1.0), constant_fn(std::abs(lambda))};
  s.name = "linear";
  s.zero = lambda == 0.0;
  s.coordinatewise = true;
  return s;
}

/// b(x) = −λx − |x|²x; one-sided with k = −λ.
inline DriftSpec cubic_drift(std::size_t d, double lambda) {
  DriftSpec s;
  s.dim = d;
  s.b = [d, lambda](double, const double* x, double* out) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) r2 += x[i] * x[i];
    for (std::size_t i = 0; i < d; ++i) out[i] = -(lambda + r2) * x[i];
  };
  s.certificate = OneSidedLipschitz{constant_fn(-lambda)};
  s.name = "cubic";
  s.coordinatewise = d == 1;
  return s;
}

enum class ClockKind { deterministic, subordinator, inverse_subordinator };

/// Source of a time-change path Z.
struct ClockSpec {
  ClockKind kind = ClockKind::deterministic;
  double rate = 1.0;                  ///< deterministic Z(t) = rate·t when no table is given
  std::vector<double> table_t, table_z;  ///< optional deterministic table, linear in between
  BernsteinSpec bernstein = BernsteinSpec::pure_drift(1.0);
  InverseClockOptions inverse;

  static ClockSpec identity() { return {}; }
  static ClockSpec linear(double rate) {
    ClockSpec c;
    c.rate = rate;
    return c;
  }
  static ClockSpec table(std::vector<double> t, std::vector<double> z) {
    ClockSpec c;
    c.table_t = std::move(t);
    c.table_z = std::move(z);
    c.validate();
    return c;
  }
  static ClockSpec subordinator(BernsteinSpec b) {
    ClockSpec c;
    c.kind = ClockKind::subordinator;
    c.bernstein = b;
    return c;
  }
  static ClockSpec inverse_subordinator(BernsteinSpec b) {
    ClockSpec c;
    c.kind = ClockKind::inverse_subordinator;
    c.bernstein = b;
    return c;
  }

  bool random() const { return kind != ClockKind::deterministic; }

  void validate() const {
    if (kind == ClockKind::deterministic) {
      if (table_t.empty()) {
        require(rate > 0.0, "deterministic clock rate must be positive");
        return;
      }
      require(table_t.size() == table_z.size() && table_t.size() >= 2, "clock table needs matching columns");
      require(table_t.front() == 0.0 && table_z.front() == 0.0, "clock table must start at (0,0)");
      for (std::size_t i = 1; i < table_t.size(); ++i) {
        require(table_t[i] > table_t[i - 1], "clock table times must increase");
        require(table_z[i] >= table_z[i - 1], "clock values must be nondecreasing");
      }
      return;
    }
    bernstein.validate();
    if (kind == ClockKind::inverse_subordinator && !bernstein.strictly_increasing())
      throw DomainError("inverse subordinator needs a strictly increasing subordinator");
  }

  double deterministic_at(double t) const {
    if (table_t.empty()) return rate * t;
    if (t >= table_t.back()) {
      if (t > table_t.back() * (1.0 + 1e-12)) throw RangeError("clock table queried past its horizon");
      return table_z.back();
    }
    const std::size_t i = static_cast<std::size_t>(std::upper_bound(table_t.begin(), table_t.end(), t) - table_t.begin()) - 1;
    const double w = (t - table_t[i]) / (table_t[i + 1] - table_t[i]);
    return table_z[i] + w * (table_z[i + 1] - table_z[i]);
  }

  template <class Gen>
  TimeChangePath sample(const TimeGrid& g, Gen& gen) const {
    switch (kind) {
      case ClockKind::deterministic: {
        TimeChangePath p{g, std::vector<double>(g.size())};
        for (std::size_t i = 0; i < g.size(); ++i) p.values[i] = deterministic_at(g[i]);
        return p;
      }
      case ClockKind::subordinator:
        return sample_subordinator(bernstein, g, gen);
      case ClockKind::inverse_subordinator:
        return sample_inverse_subordinator(bernstein, g, gen, inverse);
    }
    return {};
  }
};

/**
 * @brief The additive process V with V_0 = 0.
 *
 * path: a deterministic sampled path (one column, or one per coordinate). jump: compound Poisson
 * with intensity `rate` and N(0, jump_scale²) jumps, independent across coordinates.
 */
struct VSpec {
  enum class Kind { zero, path, jump };
  Kind kind = Kind::zero;
  SampledFunction path;
  double rate = 0.0;
  double jump_scale = 1.0;

  static VSpec none() { return {}; }
  static VSpec deterministic(SampledFunction p) {
    VSpec v;
    v.kind = Kind::path;
    v.path = std::move(p);
    v.validate(v.path.dim);
    return v;
  }
  static VSpec jumps(double rate, double scale) {
    VSpec v;
    v.kind = Kind::jump;
    v.rate = rate;
    v.jump_scale = scale;
    return v;
  }

  void validate(std::size_t d) const {
    if (kind == Kind::path) {
      require(path.dim == 1 || path.dim == d, "V path must have one column or one per coordinate");
      for (std::size_t k = 0; k < path.dim; ++k) require(path(0, k) == 0.0, "V must start at 0");
    }
    if (kind == Kind::jump) require(rate >= 0.0 && jump_scale >= 0.0, "V jump parameters must be nonnegative");
  }

  /// Adds V on the grid into out (row-major, grid.size() × d).
  template <class Gen>
  void add_to(const TimeGrid& g, std::size_t d, Gen& gen, double* out) const {
    if (kind == Kind::zero) return;
    if (kind == Kind::path) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] > path.grid.back() * (1.0 + 1e-12)) throw RangeError("V path shorter than the horizon");
        for (std::size_t k = 0; k < d; ++k) out[i * d + k] += path.at(g[i], path.dim == 1 ? 0 : k);
      }
      return;
    }
    if (rate == 0.0) return;
    std::exponential_distribution<double> E(rate);
    std::normal_distribution<double> N(0.0, jump_scale);
    std::vector<double> level(d, 0.0);
    double next = E(gen);
    for (std::size_t i = 0; i < g.size(); ++i) {
      while (next <= g[i]) {
        for (std::size_t k = 0; k < d; ++k) level[k] += N(gen);
        next += E(gen);
      }
      for (std::size_t k = 0; k < d; ++k) out[i * d + k] += level[k];
    }
  }
};

/**
 * @brief Law of U_t = W^H_{Z(t)} + V_t.
 *
 * One hurst entry and one clock are shared by all coordinates; d entries make the model
 * anisotropic (coordinate i uses H_i and its own clock Z^{(i)}).
 */
struct NoiseModel {
  std::size_t dim = 1;
  std::vector<double> hurst{0.3};
  std::vector<ClockSpec> clocks{ClockSpec::identity()};
  VSpec v;
  NoiseScale scale = NoiseScale::representation;

  double H(std::size_t k) const { return hurst.size() == 1 ? hurst[0] : hurst[k]; }
  const ClockSpec& clock(std::size_t k) const { return clocks.size() == 1 ? clocks[0] : clocks[k]; }
  bool shared_clock() const { return clocks.size() == 1; }
  bool anisotropic() const { return hurst.size() > 1 || clocks.size() > 1; }

  bool deterministic_clocks() const {
    for (const auto& c : clocks)
      if (c.random()) return false;
    return true;
  }
  bool any_inverse_clock() const {
    for (const auto& c : clocks)
      if (c.kind == ClockKind::inverse_subordinator) return true;
    return false;
  }

  void validate() const {
    require(dim >= 1, "dimension must be at least 1");
    require(hurst.size() == 1 || hurst.size() == dim, "hurst needs one entry or one per coordinate");
    require(clocks.size() == 1 || clocks.size() == dim, "clocks need one entry or one per coordinate");
    for (double h : hurst) HurstExponent check(h);
    for (const auto& c : clocks) c.validate();
    v.validate(dim);
  }

  double scale_factor(std::size_t k) const { return noise_scale_factor(HurstExponent(H(k)), scale); }
};

/// Stream of the clock driving coordinate k.
inline Stream clock_stream(const NoiseModel& m, std::size_t k) {
  return m.shared_clock() ? Stream::clock : coord_stream(Stream::clock_coord, k);
}

/**
 * @brief Draws noise realizations of a model on a fixed grid.
 *
 * Cholesky factors are built once for deterministic clocks and per path otherwise.
 * Realization `index` depends only on (seed, index).
 */
class NoiseSampler {
 public:
  NoiseSampler(NoiseModel model, TimeGrid grid) : m_(std::move(model)), grid_(std::move(grid)) {
    m_.validate();
    if (m_.deterministic_clocks()) {
      fixed_.resize(m_.dim);
      for (std::size_t k = 0; k < m_.dim; ++k) {
        bool reused = false;
        for (std::size_t j = 0; j < k && !reused; ++j)
          if (m_.H(j) == m_.H(k) && (m_.shared_clock() || same_clock(j, k))) {
            fixed_[k] = fixed_[j];
            reused = true;
          }
        if (reused) continue;
        Rng unused(0);
        const auto z = m_.clock(k).sample(grid_, unused);
        fixed_[k] = std::make_shared<FbmCholeskySampler>(m_.H(k), z.values, m_.scale_factor(k));
      }
    }
  }

  const NoiseModel& model() const { return m_; }
  const TimeGrid& grid() const { return grid_; }

  /// U on the grid; clocks (if non-null) receives Z^{(k)} for each coordinate.
  SampledFunction sample(std::uint64_t seed, std::uint64_t index, std::vector<TimeChangePath>* clocks = nullptr) const {
    const std::size_t d = m_.dim, n = grid_.size();
    SampledFunction U(grid_, d);
    std::vector<double> col(n);
    if (clocks) clocks->clear();
    std::vector<TimeChangePath> z(m_.clocks.size());
    if (!fixed_.empty() || clocks) {
      for (std::size_t c = 0; c < m_.clocks.size(); ++c) {
        Rng rng(seed, clock_stream(m_, c), index);
        z[c] = m_.clocks[c].sample(grid_, rng);
      }
    }
    std::shared_ptr<FbmCholeskySampler> shared;
    for (std::size_t k = 0; k < d; ++k) {
      std::shared_ptr<FbmCholeskySampler> s;
      if (!fixed_.empty()) {
        s = fixed_[k];
      } else {
        const std::size_t c = m_.shared_clock() ? 0 : k;
        if (z[c].values.empty()) {
          Rng rng(seed, clock_stream(m_, c), index);
          z[c] = m_.clocks[c].sample(grid_, rng);
        }
        if (m_.shared_clock() && shared && m_.H(k) == m_.H(0)) {
          s = shared;
        } else {
          s = std::make_shared<FbmCholeskySampler>(m_.H(k), z[c].values, m_.scale_factor(k));
          if (m_.shared_clock() && k == 0) shared = s;
        }
      }
      Rng rng(seed, coord_stream(Stream::fbm_coord, k), index);
      s->sample(rng, col.data());
      for (std::size_t i = 0; i < n; ++i) U(i, k) = col[i];
    }
    Rng vr(seed, Stream::v_process, index);
    m_.v.add_to(grid_, d, vr, U.values.data());
    if (clocks) {
      for (std::size_t k = 0; k < d; ++k) clocks->push_back(z[m_.shared_clock() ? 0 : k]);
    }
    return U;
  }

 private:
  bool same_clock(std::size_t j, std::size_t k) const {
    const auto& a = m_.clock(j);
    const auto& b = m_.clock(k);
    return a.rate == b.rate && a.table_t == b.table_t && a.table_z == b.table_z;
  }

  NoiseModel m_;
  TimeGrid grid_;
  std::vector<std::shared_ptr<FbmCholeskySampler>> fixed_;
};

struct SolverOptions {
  double tol = 1e-7;   ///< accepted Euler discrepancy per substep, relative to max(1, |y|∞)
  int max_depth = 24;  ///< substep halvings allowed inside one grid cell
};

namespace detail {

/**
 * @brief Explicit Euler on y' = b(t, y + u(t)) with a half-step comparison on every step.
 *
 * A step is accepted when |half − full|∞ ≤ tol·max(1,|y|∞) and the extrapolated value
 * 2·half − full is kept; otherwise the step is halved.
 */
class RichardsonStepper {
 public:
  RichardsonStepper(const DriftSpec& drift, SolverOptions opt) : b_(drift), opt_(opt), d_(drift.dim) {
    buf_.assign(static_cast<std::size_t>(opt_.max_depth + 2) * 6 * d_, 0.0);
  }

  double error_sum() const { return err_; }

  template <class NoiseAt>
  void advance(double t0, double t1, double* y, NoiseAt&& u) {
    rec(t0, t1, y, u, 0);
  }

 private:
  template <class NoiseAt>
  void rec(double a, double c, double* y, NoiseAt& u, int depth) {
    double* z = &buf_[static_cast<std::size_t>(depth) * 6 * d_];
    double* f0 = z + d_;
    double* full = f0 + d_;
    double* mid = full + d_;
    double* f1 = mid + d_;
    double* half = f1 + d_;
    const double h = c - a, m = a + 0.5 * h;
    u(a, z);
    for (std::size_t i = 0; i < d_; ++i) z[i] += y[i];
    b_.b(a, z, f0);
    for (std::size_t i = 0; i < d_; ++i) {
      full[i] = y[i] + h * f0[i];
      mid[i] = y[i] + 0.5 * h * f0[i];
    }
    u(m, z);
    for (std::size_t i = 0; i < d_; ++i) z[i] += mid[i];
    b_.b(m, z, f1);
    double err = 0.0, ys = 1.0;
    for (std::size_t i = 0; i < d_; ++i) {
      half[i] = mid[i] + 0.5 * h * f1[i];
      err = std::max(err, std::abs(half[i] - full[i]));
      ys = std::max(ys, std::abs(y[i]));
    }
    const bool finite = std::isfinite(err);
    if (finite && err <= opt_.tol * ys) {
      for (std::size_t i = 0; i < d_; ++i) y[i] = 2.0 * half[i] - full[i];
      err_ += err;
      return;
    }
    if (depth >= opt_.max_depth)
      throw StepRejectionError("Richardson discrepancy above tolerance after " + std::to_string(opt_.max_depth) +
                               " halvings near t = " + std::to_string(a) + "; drift too stiff for this grid");
    rec(a, m, y, u, depth + 1);
    rec(m, c, y, u, depth + 1);
  }

  const DriftSpec& b_;
  SolverOptions opt_;
  std::size_t d_;
  std::vector<double> buf_;
  double err_ = 0.0;
};

}  // namespace detail

struct SolutionPath {
  TimeGrid grid;
  SampledFunction X;
  SampledFunction U;
  double richardson_error = 0.0;  ///< sum of accepted step discrepancies

  std::vector<double> terminal() const {
    const std::size_t n = grid.size() - 1;
    return std::vector<double>(X.values.begin() + static_cast<long>(n * X.dim), X.values.end());
  }
};

/**
 * @brief X = Y + U where Y' = b(t, Y + U_t), Y_0 = x, with U linear between grid nodes.
 */
inline SolutionPath solve_sde(const std::vector<double>& x, const DriftSpec& drift, const SampledFunction& U,
                              const SolverOptions& opt = {}) {
  const std::size_t d = drift.dim;
  require(x.size() == d, "initial condition dimension mismatch");
  require(U.dim == d, "noise dimension mismatch");
  for (std::size_t k = 0; k < d; ++k) require(U(0, k) == 0.0, "noise must start at 0");
  SolutionPath sol{U.grid, SampledFunction(U.grid, d), U, 0.0};
  std::vector<double> y(x);
  for (std::size_t k = 0; k < d; ++k) sol.X(0, k) = x[k];
  if (drift.zero) {
    for (std::size_t i = 1; i < U.size(); ++i)
      for (std::size_t k = 0; k < d; ++k) sol.X(i, k) = x[k] + U(i, k);
    return sol;
  }
  detail::RichardsonStepper st(drift, opt);
  const auto& t = U.grid.points();
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double t0 = t[i], t1 = t[i + 1], h = t1 - t0;
    auto u = [&](double s, double* out) {
      const double w = (s - t0) / h;
      for (std::size_t k = 0; k < d; ++k) out[k] = (1.0 - w) * U(i, k) + w * U(i + 1, k);
    };
    st.advance(t0, t1, y.data(), u);
    for (std::size_t k = 0; k < d; ++k) sol.X(i + 1, k) = y[k] + U(i + 1, k);
  }
  sol.richardson_error = st.error_sum();
  return sol;
}

/**
 * @brief Anisotropic equation: U^{(i)} = W^{H_i,(i)}_{Z^{(i)}} + V^{(i)} is supplied per coordinate.
 *
 * The random ODE is the same as for solve_sde; the drift must carry a Yamada–Watanabe certificate.
 */
inline SolutionPath solve_anisotropic(const std::vector<double>& x, const DriftSpec& drift,
                                      const SampledFunction& U, const SolverOptions& opt = {}) {
  if (!drift.yw()) throw DomainError("solve_anisotropic needs a Yamada-Watanabe certificate");
  return solve_sde(x, drift, U, opt);
}

struct MonteCarloOptions {
  std::size_t steps = 64;
  std::size_t n_paths = 10000;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  SolverOptions solver;
};

/// X_T(x) for n_paths independent noise realizations, row-major (path, coordinate).
inline std::vector<double> terminal_states(const std::vector<double>& x, double T, const NoiseModel& model,
                                           const DriftSpec& drift, const MonteCarloOptions& opt) {
  require(T > 0.0, "horizon must be positive");
  require(model.dim == drift.dim && x.size() == drift.dim, "model, drift and start dimensions differ");
  NoiseSampler sampler(model, TimeGrid::uniform(T, opt.steps));
  const std::size_t d = drift.dim;
  std::vector<double> out(opt.n_paths * d);
  parallel_for(opt.n_paths, opt.threads, [&](std::size_t i) {
    const auto U = sampler.sample(opt.seed, i);
    const auto sol = solve_sde(x, drift, U, opt.solver);
    const auto xt = sol.terminal();
    std::copy(xt.begin(), xt.end(), out.begin() + static_cast<long>(i * d));
  });
  return out;
}

/// Monte Carlo P_T f(x) with its standard error.
inline Estimate estimate_pt(const FunctionDescriptor& f, const std::vector<double>& x, double T,
                            const NoiseModel& model, const DriftSpec& drift, const MonteCarloOptions& opt) {
  require(opt.n_paths >= 100, "estimate_pt needs at least 100 paths");
  FunctionDescriptor g = f;
  g.bind_dimension(drift.dim);
  if (g.op() == FunctionDescriptor::Op::constant) {
    const double c = g(x.data());
    return Estimate{c, 0.0, opt.n_paths};
  }
  const auto xt = terminal_states(x, T, model, drift, opt);
  std::vector<double> v(opt.n_paths);
  for (std::size_t i = 0; i < opt.n_paths; ++i) v[i] = g(&xt[i * drift.dim]);
  return mean_se(v);
}

struct GradientEstimate {
  Estimate slope;
  bool warning = false;  ///< SE above half the slope magnitude
};

/**
 * @brief Forward difference (P_T f(x+he) − P_T f(x))/h with common random numbers.
 *
 * Both starts see the identical noise realization, so the SE comes from paired differences.
 */
inline GradientEstimate estimate_gradient(const FunctionDescriptor& f, const std::vector<double>& x,
                                          const std::vector<double>& e, double h, double T, const NoiseModel& model,
                                          const DriftSpec& drift, const MonteCarloOptions& opt) {
  require(h > 0.0, "finite-difference step must be positive");
  require(e.size() == x.size(), "direction dimension mismatch");
  double n2 = 0.0;
  for (double v : e) n2 += v * v;
  require(std::abs(n2 - 1.0) < 1e-12, "direction must be a unit vector");
  require(model.dim == drift.dim && x.size() == drift.dim, "model, drift and start dimensions differ");
  FunctionDescriptor g = f;
  g.bind_dimension(drift.dim);
  const std::size_t d = drift.dim;
  std::vector<double> xh(x);
  for (std::size_t k = 0; k < d; ++k) xh[k] += h * e[k];
  NoiseSampler sampler(model, TimeGrid::uniform(T, opt.steps));
  std::vector<double> diff(opt.n_paths);
  parallel_for(opt.n_paths, opt.threads, [&](std::size_t i) {
    const auto U = sampler.sample(opt.seed, i);
    const auto a = solve_sde(x, drift, U, opt.solver).terminal();
    const auto b = solve_sde(xh, drift, U, opt.solver).terminal();
    diff[i] = (g(b.data()) - g(a.data())) / h;
  });
  GradientEstimate r;
  r.slope = mean_se(diff);
  r.warning = r.slope.se > 0.5 * std::abs(r.slope.mean);
  return r;
}

}  // namespace tcfbm

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "tcfbm/error.hpp"
#include "tcfbm/fbm.hpp"
#include "tcfbm/frac_kernel.hpp"
#include "tcfbm/kcalc.hpp"
#include "tcfbm/rng.hpp"
#include "tcfbm/sde.hpp"
#include "tcfbm/specfun.hpp"
#include "tcfbm/timechange.hpp"

namespace tcfbm {

/// ∫₀^T e^{−K(t)} dℓ_ε(t), Gauss–Legendre on every piece where ℓ_ε' is linear.
inline double stieltjes_regularized(const RegularizedClock& l, const KProfile& K, double T) {
  require(T > 0.0 && T <= l.horizon() * (1.0 + 1e-12), "Stieltjes integral past the clock horizon");
  const auto bp = l.breakpoints(0.0, T);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    auto f = [&](double t) { return std::exp(-K.K(t)) * l.derivative(t); };
    s += boost::math::quadrature::gauss<double, 7>::integrate(f, bp[i], bp[i + 1]);
  }
  return s;
}

/// Same bound from the clock length L = ℓ_ε(T)−ℓ_ε(0) and S = ∫₀^T e^{−K}dℓ_ε.
inline double compensator_bound(HurstExponent H, double dist, double L, double S) {
  require(dist >= 0.0, "distance must be nonnegative");
  if (dist == 0.0) return 0.0;
  const double c = kernel_constant(H) / S;
  const double h = H.value();
  return c * c * dist * dist / (2.0 * (1.0 - h)) * std::pow(L, 2.0 - 2.0 * h);
}

/// C²_{T,H}|x−y|²/(2(1−H))·[ℓ_ε(T)−ℓ_ε(0)]^{2−2H}, C_{T,H} = kernel_constant(H)/∫₀^T e^{−K}dℓ_ε.
inline double compensator_bound(HurstExponent H, double dist, const RegularizedClock& l, const KProfile& K, double T) {
  if (dist == 0.0) return 0.0;
  return compensator_bound(H, dist, l(T) - l(0.0), stieltjes_regularized(l, K, T));
}

struct CouplingOptions {
  std::size_t cells = 256;     ///< uniform cells on each Brownian clock [0, ℓ_ε(T)−ℓ_ε(0)]
  double tolerance = 1e-8;     ///< meeting threshold relative to the initial distance
  double delta = 0.99;         ///< anisotropic ξ uses ℓ_ε(δT)
  /// solve_regularized only: if positive, the Brownian clock is [0, noise_span] whatever ℓ_ε(T) is,
  /// so runs on different clocks with one seed read the same W^H path.
  double noise_span = 0.0;
  SolverOptions solver;
};

/// M, ⟨M⟩ and R = exp(M − ½⟨M⟩) for one clock.
struct GirsanovWeight {
  SampledFunction eta;
  double M = 0.0;
  double compensator = 0.0;
  double R = 1.0;
};

/**
 * @brief Left-point stochastic integral of η = 𝒦_H^{-1}(∫g) against the shared Brownian increments.
 *
 * g_cells holds dim values per cell of the uniform clock grid; dW holds the matching increments.
 */
inline GirsanovWeight girsanov_weight(HurstExponent H, const TimeGrid& clock_grid, const std::vector<double>& g_cells,
                                      const std::vector<double>& dW, std::size_t dim) {
  const std::size_t n = clock_grid.size() - 1;
  require(g_cells.size() == n * dim && dW.size() == n * dim, "girsanov_weight: cell data not aligned");
  GirsanovWeight w;
  bool null = true;
  for (double v : g_cells)
    if (v != 0.0) null = false;
  if (null) {
    w.eta = SampledFunction(clock_grid, dim);
    return w;
  }
  w.eta = invert_kernel_cells(H, clock_grid, g_cells, dim);
  std::vector<double> m(n), q(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double dr = clock_grid[c + 1] - clock_grid[c];
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      a += w.eta(c, k) * dW[c * dim + k];
      b += w.eta(c, k) * w.eta(c, k);
    }
    m[c] = -a;
    q[c] = b * dr;
  }
  w.M = pairwise_sum(m);
  w.compensator = pairwise_sum(q);
  w.R = std::exp(w.M - 0.5 * w.compensator);
  return w;
}

/**
 * @brief Coupled pair (X, Y) with its Girsanov ingredients.
 *
 * One entry per clock group: a single group for the isotropic coupling, one per coordinate
 * for the anisotropic one. g and eta live on the group's uniform Brownian clock grid;
 * g is stored per cell (the last node repeats the last cell).
 */
struct CouplingResult {
  TimeGrid grid;
  SampledFunction X, Y;
  std::vector<double> xi;
  std::vector<double> tau;
  std::vector<TimeGrid> clock_grid;
  std::vector<SampledFunction> g;
  std::vector<SampledFunction> eta;
  std::vector<std::vector<double>> dW;
  std::vector<double> hurst;
  std::vector<double> l1_gap;  ///< ‖X_t − Y_t‖₁ on the grid
  double M = 0.0;
  double compensator = 0.0;
  double R = 1.0;
  double bound = 0.0;  ///< closed-form bound on the compensator
  bool compensator_warning = false;

  double tau_max() const { return *std::max_element(tau.begin(), tau.end()); }
};

namespace detail {

struct ClockGroup {
  const RegularizedClock* clock;
  std::vector<std::size_t> coords;
  double hurst;
  double xi;
  double l0, L, dr;
  std::vector<double> wh;  ///< (n+1) × coords, W^H at the clock nodes
  std::vector<double> dW;  ///< n × coords
  std::vector<double> disp;
  bool met = false;
  double tau = 0.0;

  double clock_units(double t) const { return (*clock)(t) - l0; }
};

inline void add_noise(const std::vector<ClockGroup>& groups, const SampledFunction* v, std::size_t n, double t,
                      double* out) {
  for (const auto& gr : groups) {
    const double r = std::clamp(gr.clock_units(t), 0.0, gr.L);
    std::size_t m = std::min(n - 1, static_cast<std::size_t>(r / gr.dr));
    const double w = (r - gr.dr * static_cast<double>(m)) / gr.dr;
    const std::size_t dc = gr.coords.size();
    for (std::size_t j = 0; j < dc; ++j)
      out[gr.coords[j]] = (1.0 - w) * gr.wh[m * dc + j] + w * gr.wh[(m + 1) * dc + j];
  }
  if (v && !v->values.empty()) {
    const std::size_t d = v->dim;
    for (std::size_t k = 0; k < d; ++k) out[k] += v->at(t, k);
    if (d == 1)
      for (const auto& gr : groups)
        for (std::size_t c : gr.coords)
          if (c != 0) out[c] += v->at(t, 0);
  }
}

/// Draws the Brownian increments and W^H nodes of every group and returns the union time grid.
inline std::vector<double> prepare_groups(std::vector<ClockGroup>& groups, double T, std::size_t n,
                                          std::uint64_t seed, std::uint64_t index, double span = 0.0) {
  std::vector<double> tpts{0.0, T};
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    auto& gr = groups[gi];
    const std::size_t dc = gr.coords.size();
    if (span > 0.0 && span < gr.L * (1.0 - 1e-12)) throw DomainError("noise_span shorter than the clock range");
    gr.dr = (span > 0.0 ? span : gr.L) / static_cast<double>(n);
    gr.dW.assign(n * dc, 0.0);
    for (std::size_t j = 0; j < dc; ++j) {
      Rng rng(seed, coord_stream(Stream::brownian, gr.coords[j]), index);
      std::normal_distribution<double> N(0.0, std::sqrt(gr.dr));
      for (std::size_t c = 0; c < n; ++c) gr.dW[c * dc + j] = N(rng);
    }
    gr.wh.assign((n + 1) * dc, 0.0);
    UniformVolterra uv(HurstExponent(gr.hurst), n, gr.dr, NoiseScale::representation);
    std::vector<double> col(n + 1);
    for (std::size_t j = 0; j < dc; ++j) {
      uv.apply(&gr.dW[j], dc, col.data());
      for (std::size_t m = 0; m <= n; ++m) gr.wh[m * dc + j] = col[m];
    }
    gr.disp.assign(n * dc, 0.0);
    double lo = 0.0;
    for (std::size_t m = 1; m < n && gr.dr * static_cast<double>(m) < gr.L; ++m) {
      lo = gr.clock->inverse(gr.l0 + gr.dr * static_cast<double>(m), lo);
      tpts.push_back(lo);
    }
  }
  std::sort(tpts.begin(), tpts.end());
  std::vector<double> pts;
  for (double t : tpts)
    if (pts.empty() || t > pts.back() + 1e-13 * T) pts.push_back(t);
  pts.back() = T;
  return pts;
}

/**
 * @brief Shared engine for both couplings: operator splitting of drift and coupling push per cell.
 *
 * The time grid is the union of every group's γ_ε image of its uniform clock grid, so each
 * time cell lies inside one clock cell of every group.
 */
inline CouplingResult run_coupling(const std::vector<double>& x, const std::vector<double>& y, const DriftSpec& drift,
                                   std::vector<ClockGroup>& groups, const SampledFunction* v, double T,
                                   std::uint64_t seed, std::uint64_t index, const CouplingOptions& opt,
                                   bool isotropic) {
  const std::size_t d = drift.dim, n = opt.cells;
  require(n >= 2, "coupling needs at least two clock cells");
  if (v && !v->values.empty()) {
    require(v->dim == 1 || v->dim == d, "v must have one column or one per coordinate");
    require(v->grid.back() >= T * (1.0 - 1e-12), "v path shorter than the horizon");
  }
  const std::vector<double> pts = prepare_groups(groups, T, n, seed, index);

  CouplingResult res;
  res.grid = TimeGrid(pts);
  res.X = SampledFunction(res.grid, d);
  res.Y = SampledFunction(res.grid, d);
  res.l1_gap.assign(pts.size(), 0.0);
  double dist0 = 0.0, l1 = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    res.X(0, k) = x[k];
    res.Y(0, k) = y[k];
    dist0 += (x[k] - y[k]) * (x[k] - y[k]);
    l1 += std::abs(x[k] - y[k]);
  }
  dist0 = std::sqrt(dist0);
  res.l1_gap[0] = l1;

  std::vector<double> X(x), Y(y), zx(d), zy(d), u0(d), u1(d), zp(2 * d);
  // X and Y share one step sequence so that solver error does not leak into X − Y
  DriftSpec paired = drift;
  paired.dim = 2 * d;
  paired.b = [&drift, d](double t, const double* z, double* out) {
    drift.b(t, z, out);
    drift.b(t, z + d, out + d);
  };
  detail::RichardsonStepper sx(drift, opt.solver), sp(paired, opt.solver);
  auto noise = [&](double t, double* out) {
    std::fill(out, out + d, 0.0);
    add_noise(groups, v, n, t, out);
  };
  auto noise2 = [&](double t, double* out) {
    noise(t, out);
    std::copy(out, out + d, out + d);
  };
  std::vector<double> gdist(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    double s = 0.0;
    for (std::size_t c : groups[gi].coords) s += (x[c] - y[c]) * (x[c] - y[c]);
    gdist[gi] = std::sqrt(s);
    if (gdist[gi] == 0.0) groups[gi].met = true;
  }

  auto push = [&](std::size_t gi, double ta, double tb, double t_event) {
    auto& gr = groups[gi];
    if (gr.met) return;
    const double la = gr.clock_units(ta), lb = gr.clock_units(tb), dl = lb - la;
    const std::size_t cell = std::min(n - 1, static_cast<std::size_t>((0.5 * (la + lb)) / gr.dr));
    const std::size_t dc = gr.coords.size();
    double dn = 0.0;
    for (std::size_t c : gr.coords) dn += (X[c] - Y[c]) * (X[c] - Y[c]);
    dn = std::sqrt(dn);
    const double step = gr.xi * dl;
    const double thr = opt.tolerance * gdist[gi];
    if (dn <= step || dn <= thr) {
      const double frac = step > 0.0 ? std::min(1.0, dn / step) : 0.0;
      for (std::size_t j = 0; j < dc; ++j) {
        const std::size_t c = gr.coords[j];
        if (dn > 0.0) gr.disp[cell * dc + j] += (X[c] - Y[c]) / dn * step * frac;
        Y[c] = X[c];
      }
      gr.met = true;
      gr.tau = (dn <= thr || frac >= 1.0) ? t_event : gr.clock->inverse(gr.l0 + la + frac * dl, ta);
      return;
    }
    for (std::size_t j = 0; j < dc; ++j) {
      const std::size_t c = gr.coords[j];
      const double dir = (X[c] - Y[c]) / dn;
      gr.disp[cell * dc + j] += dir * step;
      Y[c] += dir * step;
    }
    double after = 0.0;
    for (std::size_t c : gr.coords) after += (X[c] - Y[c]) * (X[c] - Y[c]);
    if (std::sqrt(after) <= thr) {
      for (std::size_t c : gr.coords) Y[c] = X[c];
      gr.met = true;
      gr.tau = tb;
    }
  };

  const ScalarFn& kfn = drift.k();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double ta = pts[i], tb = pts[i + 1];
    const bool coupling_first = isotropic && kfn(0.5 * (ta + tb)) > 0.0;
    if (coupling_first)
      for (std::size_t gi = 0; gi < groups.size(); ++gi) push(gi, ta, tb, ta);
    noise(ta, u0.data());
    for (std::size_t k = 0; k < d; ++k) {
      zx[k] = X[k] - u0[k];
      zy[k] = Y[k] - u0[k];
    }
    bool all_met = true;
    for (const auto& gr : groups) all_met = all_met && gr.met;
    if (drift.zero) {
      // nothing to integrate
    } else {
      if (all_met) {
        sx.advance(ta, tb, zx.data(), noise);
        zy = zx;
      } else {
        std::copy(zx.begin(), zx.end(), zp.begin());
        std::copy(zy.begin(), zy.end(), zp.begin() + static_cast<long>(d));
        sp.advance(ta, tb, zp.data(), noise2);
        std::copy(zp.begin(), zp.begin() + static_cast<long>(d), zx.begin());
        std::copy(zp.begin() + static_cast<long>(d), zp.end(), zy.begin());
      }
    }
    noise(tb, u1.data());
    for (std::size_t k = 0; k < d; ++k) {
      X[k] = zx[k] + u1[k];
      Y[k] = zy[k] + u1[k];
    }
    for (const auto& gr : groups)
      if (gr.met)
        for (std::size_t c : gr.coords) Y[c] = X[c];
    if (!coupling_first)
      for (std::size_t gi = 0; gi < groups.size(); ++gi) push(gi, ta, tb, tb);
    double gap = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      res.X(i + 1, k) = X[k];
      res.Y(i + 1, k) = Y[k];
      gap += std::abs(X[k] - Y[k]);
    }
    res.l1_gap[i + 1] = gap;
  }

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    auto& gr = groups[gi];
    if (!gr.met) {
      double dn = 0.0;
      for (std::size_t c : gr.coords) dn += (X[c] - Y[c]) * (X[c] - Y[c]);
      throw CouplingFailure("coupling did not close by T: remaining gap " + std::to_string(std::sqrt(dn)) +
                            " (initial " + std::to_string(gdist[gi]) + "); refine the clock grid");
    }
  }

  double M = 0.0, Q = 0.0;
  for (auto& gr : groups) {
    const std::size_t dc = gr.coords.size();
    TimeGrid cg = TimeGrid::uniform(gr.L, n);
    std::vector<double> cells(n * dc);
    for (std::size_t q = 0; q < n * dc; ++q) cells[q] = gr.disp[q] / gr.dr;
    auto w = girsanov_weight(HurstExponent(gr.hurst), cg, cells, gr.dW, dc);
    M += w.M;
    Q += w.compensator;
    SampledFunction gs(cg, dc);
    for (std::size_t m = 0; m <= n; ++m)
      for (std::size_t j = 0; j < dc; ++j) gs(m, j) = cells[std::min(m, n - 1) * dc + j];
    res.clock_grid.push_back(cg);
    res.g.push_back(std::move(gs));
    res.eta.push_back(std::move(w.eta));
    res.dW.push_back(gr.dW);
    res.xi.push_back(gr.xi);
    res.tau.push_back(gr.tau);
    res.hurst.push_back(gr.hurst);
  }
  res.M = M;
  res.compensator = Q;
  res.R = std::exp(M - 0.5 * Q);
  return res;
}

}  // namespace detail

/**
 * @brief Isotropic coupling with ξ = |x−y| / ∫₀^T e^{−K} dℓ_ε and push ξ·(X−Y)/|X−Y| dℓ_ε.
 *
 * v may be empty (v ≡ 0). The noise is W^H_{ℓ_ε(t)−ℓ_ε(0)} from the representation on a uniform
 * clock grid; the same Brownian increments enter M.
 */
inline CouplingResult couple(const std::vector<double>& x, const std::vector<double>& y, const DriftSpec& drift,
                             const RegularizedClock& clock, const SampledFunction& v, double T, HurstExponent H,
                             std::uint64_t seed, std::uint64_t index = 0, const CouplingOptions& opt = {}) {
  require(drift.osl() != nullptr, "couple needs a one-sided Lipschitz certificate");
  require(x.size() == drift.dim && y.size() == drift.dim, "start dimension mismatch");
  require(x != y, "coupling needs x != y");
  require(T > 0.0 && T <= clock.horizon() * (1.0 + 1e-12), "T must lie inside the regularized clock horizon");
  require(H.in_theorem_range(), "coupling needs H in (0,1/2)");
  KProfile K(drift.k(), T, 256);
  double dist = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) dist += (x[k] - y[k]) * (x[k] - y[k]);
  dist = std::sqrt(dist);
  detail::ClockGroup gr;
  gr.clock = &clock;
  for (std::size_t k = 0; k < drift.dim; ++k) gr.coords.push_back(k);
  gr.hurst = H.value();
  gr.l0 = clock(0.0);
  gr.L = clock(T) - gr.l0;
  const double S = stieltjes_regularized(clock, K, T);
  gr.xi = dist / S;
  std::vector<detail::ClockGroup> groups{gr};
  auto res = detail::run_coupling(x, y, drift, groups, &v, T, seed, index, opt, true);
  res.bound = compensator_bound(H, dist, gr.L, S);
  res.compensator_warning = res.compensator > res.bound * (1.0 + 1e-6);
  return res;
}

/**
 * @brief Anisotropic coupling: coordinate i is pushed by ξ^{(i)}·sign(X^{(i)}−Y^{(i)}) dℓ_ε^{(i)} until τ_i.
 *
 * ξ^{(i)} = Φ_{u,k}(T, ‖x−y‖₁) / (ℓ_ε^{(i)}(δT) − ℓ_ε^{(i)}(0)). After τ_i the coordinate is
 * held equal to X^{(i)}.
 */
inline CouplingResult couple_anisotropic(const std::vector<double>& x, const std::vector<double>& y,
                                         const DriftSpec& drift, const std::vector<RegularizedClock>& clocks,
                                         const SampledFunction& v, double T, const std::vector<double>& hurst,
                                         std::uint64_t seed, std::uint64_t index = 0,
                                         const CouplingOptions& opt = {}) {
  const std::size_t d = drift.dim;
  require(drift.yw() != nullptr, "couple_anisotropic needs a Yamada-Watanabe certificate");
  require(x.size() == d && y.size() == d, "start dimension mismatch");
  require(clocks.size() == d && hurst.size() == d, "one clock and one Hurst exponent per coordinate");
  require(opt.delta > 0.0 && opt.delta < 1.0, "delta must lie in (0,1)");
  require(x != y, "coupling needs x != y");
  double l1 = 0.0;
  for (std::size_t k = 0; k < d; ++k) l1 += std::abs(x[k] - y[k]);
  KProfile K(drift.k(), T, 256);
  const double phi = phi_uk(drift.yw()->u, K, T, l1);
  std::vector<detail::ClockGroup> groups(d);
  double bound = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    HurstExponent Hi(hurst[i]);
    require(T <= clocks[i].horizon() * (1.0 + 1e-12), "T must lie inside every clock horizon");
    auto& gr = groups[i];
    gr.clock = &clocks[i];
    gr.coords = {i};
    gr.hurst = hurst[i];
    gr.l0 = clocks[i](0.0);
    gr.L = clocks[i](T) - gr.l0;
    const double den = clocks[i](opt.delta * T) - gr.l0;
    gr.xi = phi / den;
    bound += 2.0 * phi * phi * theta_h(Hi) * std::pow(gr.L, 2.0 - 2.0 * hurst[i]) / (den * den);
  }
  auto res = detail::run_coupling(x, y, drift, groups, &v, T, seed, index, opt, false);
  res.bound = bound;
  res.compensator_warning = res.compensator > res.bound * (1.0 + 1e-6);
  return res;
}

/**
 * @brief X^{ℓ_ε,v}(x) alone, on the same discretization the coupling uses.
 *
 * U in the result is W^H_{ℓ_ε(t)−ℓ_ε(0)} + v_t at the grid points.
 */
inline SolutionPath solve_regularized(const std::vector<double>& x, const DriftSpec& drift,
                                      const RegularizedClock& clock, const SampledFunction& v, double T,
                                      HurstExponent H, std::uint64_t seed, std::uint64_t index = 0,
                                      const CouplingOptions& opt = {}) {
  const std::size_t d = drift.dim, n = opt.cells;
  require(x.size() == d, "start dimension mismatch");
  require(T > 0.0 && T <= clock.horizon() * (1.0 + 1e-12), "T must lie inside the regularized clock horizon");
  detail::ClockGroup gr;
  gr.clock = &clock;
  for (std::size_t k = 0; k < d; ++k) gr.coords.push_back(k);
  gr.hurst = H.value();
  gr.l0 = clock(0.0);
  gr.L = clock(T) - gr.l0;
  gr.xi = 0.0;
  std::vector<detail::ClockGroup> groups{gr};
  const auto pts = detail::prepare_groups(groups, T, n, seed, index, opt.noise_span);
  TimeGrid grid(pts);
  SampledFunction U(grid, d);
  for (std::size_t i = 0; i < pts.size(); ++i) detail::add_noise(groups, &v, n, pts[i], &U.values[i * d]);
  for (std::size_t k = 0; k < d; ++k) U(0, k) = 0.0;
  SolutionPath sol{grid, SampledFunction(grid, d), U, 0.0};
  std::vector<double> z(x);
  for (std::size_t k = 0; k < d; ++k) sol.X(0, k) = x[k];
  detail::RichardsonStepper st(drift, opt.solver);
  auto noise = [&](double t, double* out) {
    std::fill(out, out + d, 0.0);
    detail::add_noise(groups, &v, n, t, out);
  };
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (!drift.zero) st.advance(pts[i], pts[i + 1], z.data(), noise);
    for (std::size_t k = 0; k < d; ++k) sol.X(i + 1, k) = z[k] + U(i + 1, k);
  }
  sol.richardson_error = st.error_sum();
  return sol;
}

}  // namespace tcfbm

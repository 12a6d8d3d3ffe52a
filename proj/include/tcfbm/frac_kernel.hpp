#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "tcfbm/grid.hpp"
#include "tcfbm/specfun.hpp"

namespace tcfbm {

/// 𝒦_H(t,s) through the generic ₂F₁ routine.
inline double volterra_kernel(HurstExponent H, double t, double s) {
  if (!(s > 0.0 && s < t)) throw DomainError("volterra_kernel requires 0 < s < t");
  const double h = H.value();
  return std::pow(t - s, h - 0.5) / gamma_fn(h + 0.5) * hyp2f1(h - 0.5, 0.5 - h, h + 0.5, 1.0 - t / s);
}

/**
 * @brief Variance factor of the representation ∫𝒦_H(t,s)dW_s.
 *
 * ∫₀^t 𝒦_H(t,s)² ds = V_H t^{2H} with V_H = Γ(2−2H) / (2H Γ(3/2−H) Γ(H+1/2)).
 */
inline double representation_variance(HurstExponent H) {
  const double h = H.value();
  return gamma_fn(2.0 - 2.0 * h) / (2.0 * h * gamma_fn(1.5 - h) * gamma_fn(h + 0.5));
}

/**
 * @brief 𝒦_H with the H-dependent Gamma factors hoisted out.
 *
 * Writes u = s/t. For 1−u ≤ 3/4 the Pfaff series is summed; otherwise the connection
 * formula collapses to A·u^{H−1/2} + B·(1−u)^{H−1/2}u^{1/2−H}·₂F₁(1, 1/2−H; 2−2H; u).
 */
class KernelEval {
 public:
  explicit KernelEval(HurstExponent H) : h_(H.value()) {
    a_ = h_ - 0.5;
    inv_gc_ = 1.0 / gamma_reflect(h_ + 0.5);
    A_ = gamma_reflect(h_ + 0.5) * gamma_reflect(1.0 - 2.0 * h_) / gamma_reflect(0.5 - h_);
    B_ = gamma_reflect(h_ + 0.5) * gamma_reflect(2.0 * h_ - 1.0) / (gamma_reflect(h_ - 0.5) * gamma_reflect(2.0 * h_));
  }

  double hurst() const { return h_; }

  double operator()(double t, double s) const {
    const double u = s / t;
    const double w = (t - s) / t;
    const double ta = std::pow(t, a_);
    if (w <= 0.75) return ta * std::pow(w * u, a_) * hyp2f1_series(a_, 2.0 * h_, h_ + 0.5, w) * inv_gc_;
    const double pu = std::pow(u, a_);
    return ta * inv_gc_ *
           (A_ * pu + B_ * std::pow(w, a_) / pu * hyp2f1_series(1.0, 0.5 - h_, 2.0 - 2.0 * h_, u));
  }

  /// 𝒦_H(t, t−d)·d^{1/2−H}, finite as d → 0.
  double near_t(double t, double d) const {
    const double w = d / t;
    const double u = (t - d) / t;
    if (w <= 0.75) return std::pow(u, a_) * hyp2f1_series(a_, 2.0 * h_, h_ + 0.5, w) * inv_gc_;
    return (*this)(t, t - d) * std::pow(d, -a_);
  }

  /// 𝒦_H(t, s)·s^{1/2−H}, finite as s → 0.
  double near_0(double t, double s) const {
    const double u = s / t;
    const double w = (t - s) / t;
    if (w <= 0.75) return (*this)(t, s) * std::pow(s, -a_);
    return inv_gc_ * (A_ + B_ * std::pow(w, a_) * std::pow(u, -2.0 * a_) *
                               hyp2f1_series(1.0, 0.5 - h_, 2.0 - 2.0 * h_, u));
  }

 private:
  double h_, a_, inv_gc_, A_, B_;
};

namespace detail {

template <int N>
struct GaussRule {
  std::array<double, N> x{};
  std::array<double, N> w{};
  GaussRule() {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& ab = G::abscissa();
    const auto& wt = G::weights();
    int k = 0;
    for (std::size_t i = 0; i < ab.size(); ++i) {
      if (ab[i] == 0.0) {
        x[k] = 0.0;
        w[k++] = wt[i];
      } else {
        x[k] = ab[i];
        w[k++] = wt[i];
        x[k] = -ab[i];
        w[k++] = wt[i];
      }
    }
  }
};

template <int N>
const GaussRule<N>& gauss_rule() {
  static const GaussRule<N> r;
  return r;
}

/**
 * ∫_a^b K(t,s)·(b−s)/(b−a) ds and ∫_a^b K(t,s)·(s−a)/(b−a) ds.
 * Cells touching s = t or s = 0 are mapped through v = (t−s)^β or v = s^β, β = H+1/2,
 * which cancels the power singularity of the kernel.
 */
template <int N>
std::pair<double, double> kernel_hat_moments(const KernelEval& K, double t, double a, double b) {
  const auto& g = gauss_rule<N>();
  const double beta = K.hurst() + 0.5;
  const double len = b - a;
  const bool near_t = b >= t;
  const bool near_0 = a <= 0.0;
  double m0 = 0.0, m1 = 0.0;
  auto add = [&](double s, double weight) {
    const double phi1 = (s - a) / len;
    m0 += weight * (1.0 - phi1);
    m1 += weight * phi1;
  };
  auto plain = [&](double lo, double hi) {
    const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
    for (int i = 0; i < N; ++i) {
      const double s = c + r * g.x[i];
      add(s, r * g.w[i] * K(t, s));
    }
  };
  auto toward_t = [&](double lo) {
    const double vmax = std::pow(t - lo, beta);
    const double c = 0.5 * vmax, r = 0.5 * vmax;
    for (int i = 0; i < N; ++i) {
      const double v = c + r * g.x[i];
      const double d = std::pow(v, 1.0 / beta);
      add(t - d, r * g.w[i] * K.near_t(t, d) / beta);
    }
  };
  auto toward_0 = [&](double hi) {
    const double vmax = std::pow(hi, beta);
    const double c = 0.5 * vmax, r = 0.5 * vmax;
    for (int i = 0; i < N; ++i) {
      const double v = c + r * g.x[i];
      const double s = std::pow(v, 1.0 / beta);
      add(s, r * g.w[i] * K.near_0(t, s) / beta);
    }
  };
  if (near_t && near_0) {
    const double m = 0.5 * (a + b);
    toward_0(m);
    toward_t(m);
  } else if (near_t) {
    toward_t(a);
  } else if (near_0) {
    toward_0(b);
  } else {
    plain(a, b);
  }
  return {m0, m1};
}

inline std::pair<double, double> kernel_hat_moments_auto(const KernelEval& K, double t, double a, double b) {
  const double len = b - a;
  const bool far = (t - b) > 3.0 * len && a > 3.0 * len;
  if (far) return kernel_hat_moments<6>(K, t, a, b);
  return kernel_hat_moments<12>(K, t, a, b);
}

inline std::size_t tri_index(std::size_t j, std::size_t c) { return j * (j - 1) / 2 + c; }

inline std::uint64_t double_bits(double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, sizeof u);
  return u;
}

// ∫_{lo}^{hi} x^{p}(1−x)^{q} dx with p = 1/2−H, q = −1/2−H, from the side that avoids cancellation.
struct BetaCells {
  double ap, bq;
  double lower(double x) const { return boost::math::beta(ap, bq, x); }
  double upper(double x) const { return boost::math::betac(ap, bq, x); }
};

}  // namespace detail

/**
 * @brief Kernel cell integrals on the unit grid {0,1,…,n}.
 *
 * Row j holds, for each cell c < j, the hat-function moments of 𝒦_H(j,·) over [c, c+1].
 * Homogeneity 𝒦_H(λt,λs) = λ^{H−1/2}𝒦_H(t,s) rescales them to any uniform grid.
 */
struct KernelMatrix {
  std::size_t n = 0;
  double hurst = 0.0;
  std::vector<double> w0, w1;

  double average(std::size_t j, std::size_t c) const {
    const std::size_t k = detail::tri_index(j, c);
    return w0[k] + w1[k];
  }
};

/**
 * @brief Inverse-operator cell weights on the unit grid.
 *
 * Row j, cell c: ∫_{c/j}^{(c+1)/j} x^{1/2−H}(1−x)^{−1/2−H} dx.
 */
struct InverseKernelMatrix {
  std::size_t n = 0;
  double hurst = 0.0;
  std::vector<double> w;
  double weight(std::size_t j, std::size_t c) const { return w[detail::tri_index(j, c)]; }
};

namespace detail {

inline std::vector<double> inverse_row(const BetaCells& bc, const std::vector<double>& x) {
  // x are cell edges in [0,1] with x.back() == 1
  const std::size_t m = x.size() - 1;
  std::vector<double> out(m);
  std::vector<double> lo(x.size()), up(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.5) {
      lo[i] = x[i] <= 0.0 ? 0.0 : bc.lower(x[i]);
      up[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      up[i] = x[i] >= 1.0 ? 0.0 : bc.upper(x[i]);
      lo[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  const double total = boost::math::beta(bc.ap, bc.bq);
  for (std::size_t c = 0; c < m; ++c) {
    if (x[c + 1] <= 0.5) {
      out[c] = lo[c + 1] - lo[c];
    } else if (x[c] > 0.5) {
      out[c] = up[c] - up[c + 1];
    } else {
      out[c] = (total - up[c + 1]) - lo[c];
    }
  }
  return out;
}

}  // namespace detail

/// Shared, immutable-after-build caches keyed by (n, H).
class KernelCache {
 public:
  static KernelCache& instance() {
    static KernelCache c;
    return c;
  }

  std::shared_ptr<const KernelMatrix> forward(std::size_t n, HurstExponent H) {
    const auto key = std::make_pair(n, detail::double_bits(H.value()));
    {
      std::lock_guard<std::mutex> lk(mu_);
      auto it = fwd_.find(key);
      if (it != fwd_.end()) return it->second;
    }
    auto m = std::make_shared<KernelMatrix>();
    m->n = n;
    m->hurst = H.value();
    const std::size_t total = n * (n + 1) / 2;
    m->w0.resize(total);
    m->w1.resize(total);
    KernelEval K(H);
    for (std::size_t j = 1; j <= n; ++j)
      for (std::size_t c = 0; c < j; ++c) {
        auto [a0, a1] = detail::kernel_hat_moments_auto(K, static_cast<double>(j), static_cast<double>(c),
                                                        static_cast<double>(c + 1));
        m->w0[detail::tri_index(j, c)] = a0;
        m->w1[detail::tri_index(j, c)] = a1;
      }
    std::lock_guard<std::mutex> lk(mu_);
    return fwd_.emplace(key, std::move(m)).first->second;
  }

  std::shared_ptr<const InverseKernelMatrix> inverse(std::size_t n, HurstExponent H) {
    const auto key = std::make_pair(n, detail::double_bits(H.value()));
    {
      std::lock_guard<std::mutex> lk(mu_);
      auto it = inv_.find(key);
      if (it != inv_.end()) return it->second;
    }
    auto m = std::make_shared<InverseKernelMatrix>();
    m->n = n;
    m->hurst = H.value();
    m->w.resize(n * (n + 1) / 2);
    const detail::BetaCells bc{1.5 - H.value(), 0.5 - H.value()};
    std::vector<double> edges;
    for (std::size_t j = 1; j <= n; ++j) {
      edges.resize(j + 1);
      for (std::size_t c = 0; c <= j; ++c) edges[c] = static_cast<double>(c) / static_cast<double>(j);
      auto row = detail::inverse_row(bc, edges);
      for (std::size_t c = 0; c < j; ++c) m->w[detail::tri_index(j, c)] = row[c];
    }
    std::lock_guard<std::mutex> lk(mu_);
    return inv_.emplace(key, std::move(m)).first->second;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<std::size_t, std::uint64_t>, std::shared_ptr<const KernelMatrix>> fwd_;
  std::map<std::pair<std::size_t, std::uint64_t>, std::shared_ptr<const InverseKernelMatrix>> inv_;
};

/// ∫₀^t 𝒦_H(t,s)² ds by adaptive Gauss–Kronrod after endpoint-grading substitutions.
inline double kernel_square_integral(HurstExponent H, double t) {
  require(t > 0.0, "kernel_square_integral requires t > 0");
  KernelEval K(H);
  const double h = H.value();
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  if (h > 0.5) {
    auto f = [&](double s) {
      if (s <= 0.0 || s >= t) return 0.0;
      const double k = K(t, s);
      return k * k;
    };
    return GK::integrate(f, 0.0, t, 15, 1e-13);
  }
  const double g = 2.0 * h;
  const double half = 0.5 * t;
  auto near0 = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double s = std::pow(v, 1.0 / g);
    const double k = K.near_0(t, s);
    return k * k / g;
  };
  auto neart = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double d = std::pow(v, 1.0 / g);
    const double k = K.near_t(t, d);
    return k * k / g;
  };
  const double vmax = std::pow(half, g);
  return GK::integrate(near0, 0.0, vmax, 15, 1e-13) + GK::integrate(neart, 0.0, vmax, 15, 1e-13);
}

/**
 * @brief Left Riemann–Liouville integral I^α f by product integration.
 *
 * f is taken piecewise linear between grid points and (x−y)^{α−1} is integrated exactly on every cell.
 */
inline SampledFunction riemann_liouville(const SampledFunction& f, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("riemann_liouville requires alpha in (0,1)");
  const auto& p = f.grid.points();
  SampledFunction out(f.grid, f.dim);
  const double ig = 1.0 / gamma_fn(alpha);
  // ∫_B^A v^{α−1} dv and ∫_B^A v^{α−1}(A−v) dv with A = x−y_i, B = x−y_{i+1}
  auto diff_pow = [](double A, double B, double e) {
    if (B <= 0.0) return std::pow(A, e);
    return -std::pow(A, e) * std::expm1(e * std::log1p(-(A - B) / A));
  };
  for (std::size_t j = 1; j < p.size(); ++j) {
    const double x = p[j];
    for (std::size_t i = 0; i < j; ++i) {
      const double A = x - p[i], B = x - p[i + 1], h = p[i + 1] - p[i];
      const double m0 = diff_pow(A, B, alpha) / alpha;
      const double mA = A * m0 - diff_pow(A, B, alpha + 1.0) / (alpha + 1.0);
      // weight of f_{i+1} is ∫ v^{α−1}(A−v)/h, of f_i the remainder
      const double w1 = mA / h;
      const double w0 = m0 - w1;
      for (std::size_t k = 0; k < f.dim; ++k) out(j, k) += w0 * f(i, k) + w1 * f(i + 1, k);
    }
    for (std::size_t k = 0; k < f.dim; ++k) out(j, k) *= ig;
  }
  return out;
}

/**
 * @brief (𝒦_H g)(t_j) = ∫₀^{t_j} 𝒦_H(t_j,s) g(s) ds, g piecewise linear.
 */
inline SampledFunction apply_kernel(HurstExponent H, const SampledFunction& g) {
  const auto& p = g.grid.points();
  const std::size_t n = p.size() - 1;
  SampledFunction out(g.grid, g.dim);
  if (g.grid.is_uniform()) {
    auto M = KernelCache::instance().forward(n, H);
    const double dt = p.back() / static_cast<double>(n);
    const double scale = std::pow(dt, H.value() + 0.5);
    for (std::size_t j = 1; j <= n; ++j)
      for (std::size_t k = 0; k < g.dim; ++k) {
        double acc = 0.0;
        for (std::size_t c = 0; c < j; ++c) {
          const std::size_t q = detail::tri_index(j, c);
          acc += M->w0[q] * g(c, k) + M->w1[q] * g(c + 1, k);
        }
        out(j, k) = scale * acc;
      }
    return out;
  }
  KernelEval K(H);
  for (std::size_t j = 1; j <= n; ++j)
    for (std::size_t c = 0; c < j; ++c) {
      auto [a0, a1] = detail::kernel_hat_moments_auto(K, p[j], p[c], p[c + 1]);
      for (std::size_t k = 0; k < g.dim; ++k) out(j, k) += a0 * g(c, k) + a1 * g(c + 1, k);
    }
  return out;
}

/**
 * @brief η = 𝒦_H^{-1}(∫g) at the grid points for piecewise-constant cell data.
 *
 * cells holds dim values per cell (n cells). Returns η at the n+1 grid points; η(0) = 0.
 */
inline SampledFunction invert_kernel_cells(HurstExponent H, const TimeGrid& grid, const std::vector<double>& cells,
                                           std::size_t dim) {
  if (!H.in_theorem_range()) throw DomainError("invert_kernel requires H in (0,1/2)");
  const auto& p = grid.points();
  const std::size_t n = p.size() - 1;
  require(cells.size() == n * dim, "invert_kernel: cell data not aligned with grid");
  SampledFunction eta(grid, dim);
  const double h = H.value();
  const double ig = 1.0 / gamma_fn(0.5 - h);
  std::shared_ptr<const InverseKernelMatrix> M;
  if (grid.is_uniform()) M = KernelCache::instance().inverse(n, H);
  const detail::BetaCells bc{1.5 - h, 0.5 - h};
  std::vector<double> edges, row;
  for (std::size_t j = 1; j <= n; ++j) {
    if (!M) {
      edges.resize(j + 1);
      for (std::size_t c = 0; c <= j; ++c) edges[c] = p[c] / p[j];
      edges[j] = 1.0;
      row = detail::inverse_row(bc, edges);
    }
    const double pre = std::pow(p[j], 0.5 - h) * ig;
    for (std::size_t k = 0; k < dim; ++k) {
      double acc = 0.0;
      for (std::size_t c = 0; c < j; ++c) acc += (M ? M->weight(j, c) : row[c]) * cells[c * dim + k];
      eta(j, k) = pre * acc;
    }
  }
  return eta;
}

/// invert_kernel on point samples; each cell carries the mean of its two endpoint values.
inline SampledFunction invert_kernel(HurstExponent H, const SampledFunction& g) {
  const std::size_t n = g.size() - 1;
  std::vector<double> cells(n * g.dim);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t k = 0; k < g.dim; ++k) cells[c * g.dim + k] = 0.5 * (g(c, k) + g(c + 1, k));
  return invert_kernel_cells(H, g.grid, cells, g.dim);
}

}  // namespace tcfbm

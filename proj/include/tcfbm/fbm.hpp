#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "tcfbm/frac_kernel.hpp"
#include "tcfbm/grid.hpp"
#include "tcfbm/rng.hpp"
#include "tcfbm/specfun.hpp"

namespace tcfbm {

/// ½(t^{2H} + s^{2H} − |t−s|^{2H}); any H in (0,1).
inline double fbm_covariance(double H, double t, double s) {
  require(H > 0.0 && H < 1.0, "fbm_covariance requires H in (0,1)");
  require(t >= 0.0 && s >= 0.0, "fbm_covariance requires nonnegative times");
  const double e = 2.0 * H;
  return 0.5 * (std::pow(t, e) + std::pow(s, e) - std::pow(std::abs(t - s), e));
}

/// How a Volterra-type sampler is normalized.
enum class NoiseScale {
  unit_fbm,        ///< covariance exactly ½(t^{2H}+s^{2H}−|t−s|^{2H})
  representation,  ///< ∫𝒦_H dW as written, covariance V_H times the above
};

inline double noise_scale_factor(HurstExponent H, NoiseScale s) {
  return s == NoiseScale::representation ? std::sqrt(representation_variance(H)) : 1.0;
}

struct FbmPath {
  std::vector<double> times;
  std::size_t dim = 1;
  std::vector<double> values;  ///< row-major (time, coordinate)
  std::vector<double> hurst;   ///< one per coordinate
  std::uint64_t seed = 0;

  double operator()(std::size_t i, std::size_t k = 0) const { return values[i * dim + k]; }
};

/// In-place lower Cholesky factor of a dense SPD matrix (row-major, n×n).
inline void cholesky_in_place(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) throw CholeskyError(j, d);
    const double l = std::sqrt(d);
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / l;
    }
    for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
  }
}

/**
 * @brief Exact Gaussian sampler of (s·W^H_t) at a fixed list of times.
 *
 * Repeated times share one value; time 0 maps to 0. The factor is built once and reused.
 */
class FbmCholeskySampler {
 public:
  FbmCholeskySampler(double H, const std::vector<double>& times, double scale = 1.0) : h_(H), scale_(scale) {
    require(H > 0.0 && H < 1.0, "fbm sampler requires H in (0,1)");
    map_.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double t = times[i];
      require(t >= 0.0, "fbm times must be nonnegative");
      if (i > 0) require(t >= times[i - 1], "fbm times must be nondecreasing");
      if (t == 0.0) {
        map_[i] = -1;
      } else if (!distinct_.empty() && t == distinct_.back()) {
        map_[i] = static_cast<long>(distinct_.size()) - 1;
      } else {
        distinct_.push_back(t);
        map_[i] = static_cast<long>(distinct_.size()) - 1;
      }
    }
    const std::size_t n = distinct_.size();
    L_.assign(n * n, 0.0);
    std::vector<double> pw(n);
    for (std::size_t i = 0; i < n; ++i) pw[i] = std::pow(distinct_[i], 2.0 * h_);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double c = 0.5 * (pw[i] + pw[j] - (i == j ? 0.0 : std::pow(distinct_[i] - distinct_[j], 2.0 * h_)));
        L_[i * n + j] = L_[j * n + i] = c;
      }
    cholesky_in_place(L_, n);
  }

  std::size_t size() const { return map_.size(); }

  /// Fills out[i] for every requested time.
  template <class Gen>
  void sample(Gen& gen, double* out) const {
    const std::size_t n = distinct_.size();
    std::vector<double> z(n), y(n);
    std::normal_distribution<double> nd;
    for (std::size_t i = 0; i < n; ++i) z[i] = nd(gen);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      const double* row = &L_[i * n];
      for (std::size_t k = 0; k <= i; ++k) s += row[k] * z[k];
      y[i] = scale_ * s;
    }
    for (std::size_t i = 0; i < map_.size(); ++i) out[i] = map_[i] < 0 ? 0.0 : y[static_cast<std::size_t>(map_[i])];
  }

 private:
  double h_, scale_;
  std::vector<double> distinct_;
  std::vector<long> map_;
  std::vector<double> L_;
};

/// d independent fBM coordinates at the given nondecreasing times.
inline FbmPath fbm_at(const std::vector<double>& hurst, const std::vector<double>& times, std::uint64_t seed,
                      std::uint64_t index = 0) {
  require(!hurst.empty(), "fbm_at needs at least one coordinate");
  require(!times.empty(), "fbm_at needs at least one time");
  FbmPath p;
  p.times = times;
  p.dim = hurst.size();
  p.hurst = hurst;
  p.seed = seed;
  p.values.assign(times.size() * p.dim, 0.0);
  std::vector<double> col(times.size());
  for (std::size_t k = 0; k < p.dim; ++k) {
    FbmCholeskySampler s(hurst[k], times);
    Rng rng(seed, coord_stream(Stream::fbm_coord, k), index);
    s.sample(rng, col.data());
    for (std::size_t i = 0; i < times.size(); ++i) p.values[i * p.dim + k] = col[i];
  }
  return p;
}

inline FbmPath fbm_at(double H, const std::vector<double>& times, std::size_t d, std::uint64_t seed,
                      std::uint64_t index = 0) {
  require(d >= 1, "dimension must be at least 1");
  return fbm_at(std::vector<double>(d, H), times, seed, index);
}

/**
 * @brief Volterra-representation sampler on an arbitrary output grid.
 *
 * Brownian increments live on an auxiliary mesh graded geometrically toward 0 and toward each
 * output time; every output value is Σ (cell average of 𝒦_H(t_j,·))·ΔB over that mesh.
 */
class FbmVolterraSampler {
 public:
  FbmVolterraSampler(HurstExponent H, const TimeGrid& grid, NoiseScale scale = NoiseScale::unit_fbm,
                     std::size_t levels = 40, double ratio = 0.5, std::size_t base_split = 4)
      : h_(H.value()), grid_(grid) {
    if (!H.in_theorem_range()) throw DomainError("fbm_volterra requires H in (0,1/2)");
    const auto& p = grid.points();
    std::vector<double> mesh{0.0};
    for (std::size_t j = 1; j < p.size(); ++j) {
      const double a = p[j - 1], b = p[j], len = b - a;
      std::vector<double> pts;
      for (std::size_t m = 1; m < base_split; ++m) pts.push_back(a + len * static_cast<double>(m) / static_cast<double>(base_split));
      const double last = len / static_cast<double>(base_split);
      double d = last;
      for (std::size_t k = 0; k < levels; ++k) {
        d *= ratio;
        pts.push_back(b - d);
      }
      if (j == 1) {
        double e = last;
        for (std::size_t k = 0; k < levels; ++k) {
          e *= ratio;
          pts.push_back(e);
        }
      }
      pts.push_back(b);
      std::sort(pts.begin(), pts.end());
      for (double x : pts)
        if (x > mesh.back()) mesh.push_back(x);
    }
    mesh_ = mesh;
    const std::size_t nc = mesh_.size() - 1;
    out_index_.resize(p.size());
    for (std::size_t j = 0; j < p.size(); ++j)
      out_index_[j] = static_cast<std::size_t>(std::lower_bound(mesh_.begin(), mesh_.end(), p[j]) - mesh_.begin());
    KernelEval K(H);
    const double norm = scale == NoiseScale::unit_fbm ? 1.0 / std::sqrt(representation_variance(H)) : 1.0;
    weights_.resize(p.size());
    for (std::size_t j = 1; j < p.size(); ++j) {
      const std::size_t upto = out_index_[j];
      weights_[j].resize(upto);
      for (std::size_t c = 0; c < upto && c < nc; ++c) {
        auto [m0, m1] = detail::kernel_hat_moments_auto(K, p[j], mesh_[c], mesh_[c + 1]);
        weights_[j][c] = norm * (m0 + m1) / (mesh_[c + 1] - mesh_[c]);
      }
    }
  }

  const std::vector<double>& brownian_mesh() const { return mesh_; }
  const TimeGrid& grid() const { return grid_; }

  template <class Gen>
  void sample(Gen& gen, double* out) const {
    const std::size_t nc = mesh_.size() - 1;
    std::vector<double> db(nc);
    std::normal_distribution<double> nd;
    for (std::size_t c = 0; c < nc; ++c) db[c] = nd(gen) * std::sqrt(mesh_[c + 1] - mesh_[c]);
    out[0] = 0.0;
    for (std::size_t j = 1; j < weights_.size(); ++j) {
      double s = 0.0;
      const auto& w = weights_[j];
      for (std::size_t c = 0; c < w.size(); ++c) s += w[c] * db[c];
      out[j] = s;
    }
  }

 private:
  double h_;
  TimeGrid grid_;
  std::vector<double> mesh_;
  std::vector<std::size_t> out_index_;
  std::vector<std::vector<double>> weights_;
};

inline FbmPath fbm_volterra(HurstExponent H, const TimeGrid& grid, std::uint64_t seed, std::size_t d = 1,
                            NoiseScale scale = NoiseScale::unit_fbm, std::uint64_t index = 0) {
  FbmVolterraSampler s(H, grid, scale);
  FbmPath p;
  p.times = grid.points();
  p.dim = d;
  p.hurst.assign(d, H.value());
  p.seed = seed;
  p.values.assign(grid.size() * d, 0.0);
  std::vector<double> col(grid.size());
  for (std::size_t k = 0; k < d; ++k) {
    Rng rng(seed, coord_stream(Stream::brownian, k), index);
    s.sample(rng, col.data());
    for (std::size_t i = 0; i < grid.size(); ++i) p.values[i * d + k] = col[i];
  }
  return p;
}

/**
 * @brief Volterra noise at the nodes of a uniform clock grid from given Brownian increments.
 *
 * dW holds n increments of variance Δ each; out receives n+1 node values (out[0] = 0).
 * Uses the cached unit-grid cell averages, so 𝒦_H is evaluated once per (n, H).
 */
class UniformVolterra {
 public:
  UniformVolterra(HurstExponent H, std::size_t n, double dt, NoiseScale scale = NoiseScale::representation)
      : n_(n), M_(KernelCache::instance().forward(n, H)) {
    require(dt > 0.0, "UniformVolterra needs positive spacing");
    factor_ = std::pow(dt, H.value() - 0.5);
    if (scale == NoiseScale::unit_fbm) factor_ /= std::sqrt(representation_variance(H));
    avg_.resize(M_->w0.size());
    for (std::size_t q = 0; q < avg_.size(); ++q) avg_[q] = M_->w0[q] + M_->w1[q];
  }

  std::size_t cells() const { return n_; }

  void apply(const double* dW, std::size_t stride, double* out) const {
    out[0] = 0.0;
    for (std::size_t j = 1; j <= n_; ++j) {
      double s = 0.0;
      const std::size_t base = detail::tri_index(j, 0);
      for (std::size_t c = 0; c < j; ++c) s += avg_[base + c] * dW[c * stride];
      out[j] = factor_ * s;
    }
  }

 private:
  std::size_t n_;
  std::shared_ptr<const KernelMatrix> M_;
  std::vector<double> avg_;
  double factor_;
};

}  // namespace tcfbm

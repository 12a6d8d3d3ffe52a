#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tcfbm/coupling.hpp"
#include "tcfbm/fbm.hpp"
#include "tcfbm/stats.hpp"

namespace tcfbm::testing {

/// Worst entrywise |empirical − exact| / SE over the upper triangle, or over the cross block.
struct CovarianceCheck {
  double worst_z = 0.0;
  double worst_abs = 0.0;
};

/// rows: n samples of m values each (row-major); exact(i, j) is the target covariance.
template <class Exact>
CovarianceCheck covariance_check(const std::vector<double>& rows, std::size_t m, Exact exact) {
  const std::size_t n = rows.size() / m;
  CovarianceCheck out;
  std::vector<double> prod(n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      const double c = exact(i, j);
      bool all_zero = true;
      for (std::size_t r = 0; r < n; ++r) {
        prod[r] = rows[r * m + i] * rows[r * m + j];
        all_zero = all_zero && prod[r] == 0.0;
      }
      if (all_zero) {
        out.worst_abs = std::max(out.worst_abs, std::abs(c));
        if (c != 0.0) out.worst_z = INFINITY;
        continue;
      }
      const Estimate e = mean_se(prod);
      out.worst_abs = std::max(out.worst_abs, std::abs(e.mean - c));
      out.worst_z = std::max(out.worst_z, std::abs(e.mean - c) / e.se);
    }
  return out;
}

template <class Sampler>
std::vector<double> draw_rows(const Sampler& s, std::size_t m, std::size_t n, std::uint64_t seed, Stream stream) {
  std::vector<double> rows(n * m);
  for (std::size_t r = 0; r < n; ++r) {
    Rng rng(seed, stream, r);
    s.sample(rng, &rows[r * m]);
  }
  return rows;
}

/// ℓ_ε built from one draw of the clock on [0, T + ε].
inline RegularizedClock regularized_clock(const ClockSpec& c, double T, double eps, std::size_t cells,
                                          std::uint64_t seed, std::uint64_t index) {
  Rng rng(seed, Stream::clock, index);
  return RegularizedClock(c.sample(TimeGrid::uniform(T + eps, cells), rng), eps);
}

/// b(x)_i = sin(x_i) with the Yamada–Watanabe certificate u(s) = s, k ≡ 1.
inline DriftSpec sine_drift(std::size_t d) {
  DriftSpec s;
  s.dim = d;
  s.b = [d](double, const double* x, double* out) {
    for (std::size_t i = 0; i < d; ++i) out[i] = std::sin(x[i]);
  };
  s.certificate = YamadaWatanabe{UFunction::linear(1.0), constant_fn(1.0)};
  s.coordinatewise = true;
  s.name = "sine";
  return s;
}

}  // namespace tcfbm::testing

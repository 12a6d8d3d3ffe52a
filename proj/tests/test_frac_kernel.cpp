#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tcfbm/frac_kernel.hpp"

using namespace tcfbm;

namespace {
double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

SampledFunction sample(const TimeGrid& g, double (*f)(double)) {
  SampledFunction out(g, 1);
  for (std::size_t i = 0; i < g.size(); ++i) out(i) = f(g[i]);
  return out;
}

TimeGrid graded(std::size_t n, double power) {
  std::vector<double> p(n + 1);
  for (std::size_t i = 0; i <= n; ++i) p[i] = std::pow(static_cast<double>(i) / static_cast<double>(n), power);
  return TimeGrid(p);
}
}  // namespace

TEST(TimeGrid, Validation) {
  EXPECT_THROW(TimeGrid({0.0}), DomainError);
  EXPECT_THROW(TimeGrid({0.1, 0.2}), DomainError);
  EXPECT_THROW(TimeGrid({0.0, 0.2, 0.2}), DomainError);
  EXPECT_NO_THROW(TimeGrid({0.0, 0.2}));
}

// mpmath
TEST(VolterraKernel, OracleValues) {
  EXPECT_LT(rel(volterra_kernel(HurstExponent(0.25), 1.0, 0.5), 1.0362623459594760994), 1e-11);
  EXPECT_LT(rel(volterra_kernel(HurstExponent(0.4999), 2.0, 1.0), 0.9999422800997180271), 1e-11);
  EXPECT_NEAR(volterra_kernel(HurstExponent(0.4999), 2.0, 1.0), 1.0, 1e-3);
  EXPECT_LT(rel(volterra_kernel(HurstExponent::kernel_only(0.75), 1.0, 0.5), 0.96705967743735027333), 1e-11);
  EXPECT_LT(rel(volterra_kernel(HurstExponent(0.1), 1.0, 1e-6), 131.84094347268882114), 1e-10);
}

TEST(VolterraKernel, SquareIntegralMatchesClosedForm) {
  for (double h : {0.1, 0.3})
    for (double t : {0.5, 1.0, 2.0}) {
      const HurstExponent H(h);
      const double v = kernel_square_integral(H, t);
      EXPECT_LT(rel(v, representation_variance(H) * std::pow(t, 2.0 * h)), 1e-9) << h << " " << t;
    }
}

// V_0.1, V_0.3, V_0.45 by mpmath
TEST(VolterraKernel, RepresentationVarianceOracle) {
  EXPECT_LT(rel(representation_variance(HurstExponent(0.1)), 3.5244806625), 1e-9);
  EXPECT_LT(rel(representation_variance(HurstExponent(0.3)), 1.38337632195), 1e-10);
  EXPECT_LT(rel(representation_variance(HurstExponent(0.45)), 1.05271480042), 1e-10);
}

TEST(RiemannLiouville, ClosedForms) {
  const auto g = TimeGrid::uniform(2.0, 1000);
  const auto one = riemann_liouville(sample(g, [](double) { return 1.0; }), 0.5);
  const auto lin = riemann_liouville(sample(g, [](double s) { return s; }), 0.5);
  const auto zero = riemann_liouville(sample(g, [](double) { return 0.0; }), 0.5);
  EXPECT_EQ(one(0), 0.0);
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double x = g[i];
    EXPECT_LT(rel(one(i), 2.0 * std::sqrt(x / M_PI)), 1e-6);
    EXPECT_LT(rel(lin(i), 4.0 / 3.0 * std::pow(x, 1.5) / std::sqrt(M_PI)), 1e-6);
    EXPECT_EQ(zero(i), 0.0);
  }
}

TEST(RiemannLiouville, Linear) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> N;
  const auto g = graded(200, 1.3);
  SampledFunction f(g, 1), h(g, 1), c(g, 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    f(i) = N(gen);
    h(i) = N(gen);
    c(i) = 2.5 * f(i) - 0.75 * h(i);
  }
  const auto If = riemann_liouville(f, 0.3), Ih = riemann_liouville(h, 0.3), Ic = riemann_liouville(c, 0.3);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(Ic(i), 2.5 * If(i) - 0.75 * Ih(i), 1e-12);
}

TEST(RiemannLiouville, RejectsAlpha) {
  const auto g = TimeGrid::uniform(1.0, 4);
  EXPECT_THROW(riemann_liouville(SampledFunction(g, 1), 1.0), DomainError);
}

TEST(ApplyKernel, ZeroAndNearBrownian) {
  const auto g = TimeGrid::uniform(1.0, 200);
  const auto z = apply_kernel(HurstExponent(0.3), SampledFunction(g, 1));
  for (double v : z.values) EXPECT_EQ(v, 0.0);
  const auto one = apply_kernel(HurstExponent(0.4999), sample(g, [](double) { return 1.0; }));
  EXPECT_EQ(one(0), 0.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(rel(one(i), g[i]), 1e-3);
}

TEST(ApplyKernel, UniformAndGeneralPathsAgree) {
  const HurstExponent H(0.2);
  const auto g = TimeGrid::uniform(1.5, 60);
  auto nu = g.points();
  nu[30] += 1e-9;  // defeats the uniform fast path
  const TimeGrid gn(nu);
  auto f = [](double s) { return std::cos(3.0 * s); };
  const auto a = apply_kernel(H, sample(g, f));
  const auto b = apply_kernel(H, sample(gn, f));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(a(i), b(i), 1e-7);
}

TEST(InvertKernel, ConstantDensityIsExact) {
  const auto g = TimeGrid::uniform(1.0, 1000);
  for (double h : {0.1, 0.3, 0.45}) {
    const HurstExponent H(h);
    const auto eta = invert_kernel(H, sample(g, [](double) { return 1.7; }));
    EXPECT_EQ(eta(0), 0.0);
    for (std::size_t i = 1; i < g.size(); ++i)
      EXPECT_LT(rel(eta(i), kernel_constant(H) * 1.7 * std::pow(g[i], 0.5 - h)), 1e-6);
  }
}

TEST(InvertKernel, ConstantDensityNonuniform) {
  const auto g = graded(300, 2.0);
  const HurstExponent H(0.25);
  const auto eta = invert_kernel(H, sample(g, [](double) { return -0.4; }));
  for (std::size_t i = 1; i < g.size(); ++i)
    EXPECT_LT(rel(eta(i), -0.4 * kernel_constant(H) * std::pow(g[i], 0.25)), 1e-9);
}

TEST(InvertKernel, SquareIntegralEquality) {
  // ∫₀^L |η|² = kc²ξ²L^{2−2H}/(2−2H) for constant |g| = ξ
  const HurstExponent H(0.3);
  const double xi = 0.8, L = 2.0;
  const auto g = TimeGrid::uniform(L, 400);
  const auto eta = invert_kernel(H, sample(g, [](double) { return 0.8; }));
  auto f = [&](double s) {
    const double e = kernel_constant(H) * xi * std::pow(s, 0.2);
    return e * e;
  };
  double q = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(eta(i) * eta(i), f(g[i]), 1e-12 * f(g[i]) + 1e-15);
  q = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, L, 10, 1e-13);
  const double kc = kernel_constant(H);
  EXPECT_LT(rel(q, kc * kc * xi * xi * std::pow(L, 1.4) / 1.4), 1e-5);
}

TEST(InvertKernel, UnitVectorDensityBound) {
  // g switches direction; |g| = 1 gives |η(s)| ≤ kc·s^{1/2−H}
  const HurstExponent H(0.2);
  const auto g = TimeGrid::uniform(1.0, 500);
  const std::size_t n = g.size() - 1;
  std::vector<double> cells(2 * n);
  for (std::size_t c = 0; c < n; ++c) {
    const double a = 7.0 * g[c];
    cells[2 * c] = std::cos(a);
    cells[2 * c + 1] = std::sin(a);
  }
  const auto eta = invert_kernel_cells(H, g, cells, 2);
  for (std::size_t i = 1; i <= n; ++i) {
    const double m = std::hypot(eta(i, 0), eta(i, 1));
    EXPECT_LE(m, kernel_constant(H) * std::pow(g[i], 0.3) * (1.0 + 1e-12));
  }
}

TEST(InvertKernel, ZeroInput) {
  const auto g = TimeGrid::uniform(1.0, 50);
  const auto eta = invert_kernel(HurstExponent(0.3), SampledFunction(g, 1));
  for (double v : eta.values) EXPECT_EQ(v, 0.0);
}

TEST(InvertKernel, RoundTripUniform) {
  const auto g = TimeGrid::uniform(1.0, 400);
  for (double h : {0.1, 0.3, 0.45}) {
    const HurstExponent H(h);
    const auto back = apply_kernel(H, invert_kernel(H, sample(g, [](double s) { return s * (1.0 - s); })));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = g[i];
      EXPECT_NEAR(back(i), s * s / 2.0 - s * s * s / 3.0, 1e-3);
    }
  }
}

TEST(InvertKernel, RoundTripGraded) {
  const auto g = graded(300, 1.5);
  const HurstExponent H(0.25);
  const auto back = apply_kernel(H, invert_kernel(H, sample(g, [](double s) { return std::exp(-s); })));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(back(i), 1.0 - std::exp(-g[i]), 1e-3);
}

#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "tcfbm/sde.hpp"

using namespace tcfbm;
using tcfbm::testing::sine_drift;

namespace {
double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

NoiseModel identity_model(std::size_t d, double H) {
  NoiseModel m;
  m.dim = d;
  m.hurst = {H};
  m.clocks = {ClockSpec::identity()};
  return m;
}

}  // namespace

TEST(KCalc, IntegralsAndSup) {
  EXPECT_EQ(k_integral(constant_fn(0.0), 2.0), 0.0);
  EXPECT_EQ(k_star(constant_fn(0.0), 2.0), 1.0);
  EXPECT_NEAR(k_integral(constant_fn(-1.0), 1.5), -1.5, 1e-14);
  EXPECT_NEAR(k_star(constant_fn(-1.0), 3.0), 1.0, 1e-14);
  EXPECT_LT(rel(k_star(constant_fn(2.0), 1.5), std::exp(6.0)), 1e-12);
  EXPECT_NEAR(k_integral([](double t) { return std::cos(t); }, 1.0), std::sin(1.0), 1e-13);
  // K rises then falls: sup at t = 1
  EXPECT_LT(rel(k_star([](double t) { return 1.0 - t; }, 3.0), std::exp(1.0)), 1e-6);
}

TEST(KCalc, ProfileInterpolation) {
  const KProfile K([](double t) { return std::cos(3.0 * t); }, 2.0, 256);
  for (double t : {0.0, 0.013, 0.7, 1.999, 2.0}) EXPECT_NEAR(K.K(t), std::sin(3.0 * t) / 3.0, 1e-9);
  EXPECT_THROW(K.K(2.5), RangeError);
}

TEST(ClassU, Screening) {
  EXPECT_TRUE(check_class_u(UFunction::linear(2.0)).ok);
  EXPECT_TRUE(check_class_u(UFunction::xlog()).ok);
  // u(s) = √s has ∫_{0+} ds/u < ∞
  std::vector<double> s, u;
  for (int i = -14; i <= 4; ++i) {
    s.push_back(std::pow(10.0, i));
    u.push_back(std::pow(10.0, 0.5 * i));
  }
  const auto rep = check_class_u(UFunction::table(s, u));
  EXPECT_FALSE(rep.ok);
  EXPECT_NE(rep.reason.find("converge"), std::string::npos);
}

TEST(GU, LinearAndXlog) {
  const auto lin = UFunction::linear(1.0);
  for (double r : {1e-6, 0.3, 1.0, 7.0}) {
    EXPECT_NEAR(g_u(lin, r), std::log(r), 1e-14);
    EXPECT_LT(rel(g_u_inverse(lin, std::log(r)), r), 1e-14);
  }
  const auto xl = UFunction::xlog();
  for (double r : {1e-8, 1e-3, 0.2}) EXPECT_NEAR(g_u(xl, r), -1.0 - std::log(-std::log(r)), 1e-9) << r;
  for (double r : {1e-5, 0.1, 0.9, 4.0}) EXPECT_LT(rel(g_u_inverse(xl, g_u(xl, r)), r), 1e-9);
  EXPECT_THROW(g_u(lin, 0.0), DomainError);
}

TEST(GU, TableQuadratureAndNewtonInverse) {
  // piecewise-linear table through u(s) = 2s
  const auto tab = UFunction::table({0.01, 1.0, 10.0}, {0.02, 2.0, 20.0});
  for (double r : {1e-4, 0.05, 0.7, 3.0, 40.0}) {
    EXPECT_NEAR(g_u(tab, r), 0.5 * std::log(r), 1e-10) << r;
    EXPECT_LT(rel(g_u_inverse(tab, 0.5 * std::log(r)), r), 1e-10) << r;
  }
}

TEST(PhiUK, ClosedForms) {
  const KProfile K(constant_fn(0.7), 2.0);
  for (double c : {1.0, 2.5}) {
    const auto u = UFunction::linear(c);
    for (double t : {0.0, 0.5, 2.0}) EXPECT_LT(rel(phi_uk(u, K, t, 0.3), std::exp(c * 0.7 * t) * 0.3), 1e-9);
  }
  const KProfile zero(constant_fn(0.0), 2.0);
  EXPECT_EQ(phi_uk(UFunction::xlog(), zero, 1.5, 0.4), 0.4);
}

TEST(PhiUK, MonotoneInTAndR) {
  const KProfile K([](double t) { return 1.0 + std::sin(t); }, 2.0);
  const auto u = UFunction::xlog();
  double prev_r = 0.0;
  for (double r : {0.01, 0.1, 0.5, 1.0}) {
    const double v = phi_uk(u, K, 1.0, r);
    EXPECT_GT(v, prev_r);
    prev_r = v;
    double prev_t = r;
    for (double t : {0.25, 0.5, 1.0, 2.0}) {
      const double w = phi_uk(u, K, t, r);
      EXPECT_GE(w, prev_t);
      prev_t = w;
    }
  }
}

TEST(Drift, Certificates) {
  EXPECT_NO_THROW(linear_drift(2, 1.0).validate(1.0));
  EXPECT_NO_THROW(linear_drift(2, 1.0, Certificate::yamada_watanabe).validate(1.0));
  auto bad = linear_drift(1, -1.0);
  bad.certificate = YamadaWatanabe{UFunction::linear(1.0), constant_fn(-1.0)};
  EXPECT_THROW(bad.validate(1.0), DomainError);
}

TEST(SolveSde, ZeroDriftIsPureNoise) {
  const auto g = TimeGrid::uniform(1.0, 50);
  SampledFunction U(g, 2);
  for (std::size_t i = 0; i < g.size(); ++i) {
    U(i, 0) = std::sin(5 * g[i]);
    U(i, 1) = g[i] * g[i];
  }
  const auto sol = solve_sde({1.0, -2.0}, zero_drift(2), U);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(sol.X(i, 0), 1.0 + U(i, 0));
    EXPECT_EQ(sol.X(i, 1), -2.0 + U(i, 1));
  }
}

TEST(SolveSde, LinearOde) {
  const auto g = TimeGrid::uniform(2.0, 40);
  const auto sol = solve_sde({1.5}, linear_drift(1, 0.8), SampledFunction(g, 1));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(sol.X(i), 1.5 * std::exp(-0.8 * g[i]), 1e-6);
}

TEST(SolveSde, VariationOfConstants) {
  // Y_t = e^{−λt}x − λ∫₀^t e^{−λ(t−s)} U_s ds with U piecewise linear; X = Y + U
  const double lambda = 1.3, x0 = 0.4;
  const auto g = TimeGrid::uniform(1.0, 2000);
  SampledFunction U(g, 1);
  for (std::size_t i = 0; i < g.size(); ++i) U(i) = std::sin(7.0 * g[i]) + 0.5 * g[i];
  const auto sol = solve_sde({x0}, linear_drift(1, lambda), U);
  double conv = 0.0;  // ∫₀^{t_i} e^{λs} U_s ds, exact for linear U on each cell
  double worst = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double a = g[i - 1], b = g[i], h = b - a;
    const double sl = (U(i) - U(i - 1)) / h;
    // ∫_a^b e^{λs}(U_a + sl(s−a)) ds
    const double ea = std::exp(lambda * a), eb = std::exp(lambda * b);
    conv += U(i - 1) * (eb - ea) / lambda + sl * ((eb * (h - 1.0 / lambda) + ea / lambda) / lambda);
    const double y = std::exp(-lambda * b) * (x0 - lambda * conv);
    worst = std::max(worst, std::abs(sol.X(i) - (y + U(i))));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(SolveSde, MeshHalvingWithinReportedTolerance) {
  const auto drift = cubic_drift(1, 0.5);
  auto path = [](const TimeGrid& g) {
    SampledFunction U(g, 1);
    for (std::size_t i = 0; i < g.size(); ++i) U(i) = std::sin(3.0 * g[i]);
    return U;
  };
  const auto a = solve_sde({2.0}, drift, path(TimeGrid::uniform(1.0, 64)));
  const auto b = solve_sde({2.0}, drift, path(TimeGrid::uniform(1.0, 128)));
  const double diff = std::abs(a.terminal()[0] - b.terminal()[0]);
  // U differs between the meshes only by interpolation error of sin(3t) on [0,1]
  EXPECT_LT(diff, std::max(a.richardson_error, b.richardson_error) + 1e-3);
}

TEST(SolveSde, OneSidedContractionPathwise) {
  const auto drift = cubic_drift(2, 0.5);
  const NoiseSampler ns(identity_model(2, 0.3), TimeGrid::uniform(1.0, 64));
  const std::vector<double> x{1.0, 0.0}, y{-0.5, 0.8};
  const double d0 = std::hypot(x[0] - y[0], x[1] - y[1]);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto U = ns.sample(3, i);
    const auto a = solve_sde(x, drift, U), b = solve_sde(y, drift, U);
    for (std::size_t j = 0; j < U.size(); ++j) {
      const double d = std::hypot(a.X(j, 0) - b.X(j, 0), a.X(j, 1) - b.X(j, 1));
      EXPECT_LE(d, std::exp(-0.5 * U.grid[j]) * d0 + 1e-5);
    }
  }
}

TEST(SolveAnisotropic, ReducesAndBihari) {
  const auto g = TimeGrid::uniform(1.0, 64);
  NoiseModel m = identity_model(2, 0.3);
  m.hurst = {0.2, 0.4};
  const NoiseSampler ns(m, g);
  const auto drift = sine_drift(2);
  const std::vector<double> x{0.3, -1.0}, y{0.9, -0.2};
  const double l1 = std::abs(x[0] - y[0]) + std::abs(x[1] - y[1]);
  const KProfile K(constant_fn(1.0), 1.0);
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto U = ns.sample(8, i);
    const auto a = solve_anisotropic(x, drift, U), b = solve_anisotropic(y, drift, U);
    const auto c = solve_sde(x, drift, U);
    EXPECT_EQ(a.X.values, c.X.values);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double d = std::abs(a.X(j, 0) - b.X(j, 0)) + std::abs(a.X(j, 1) - b.X(j, 1));
      EXPECT_LE(d, bihari_envelope(UFunction::linear(1.0), K, l1, g[j]) + 1e-5);
    }
  }
  EXPECT_THROW(solve_anisotropic(x, linear_drift(2, 1.0), ns.sample(8, 0)), DomainError);
}

TEST(SolveSde, DimensionChecks) {
  const auto g = TimeGrid::uniform(1.0, 4);
  EXPECT_THROW(solve_sde({0.0, 0.0}, zero_drift(1), SampledFunction(g, 1)), DomainError);
  SampledFunction U(g, 1);
  U(0) = 0.5;
  EXPECT_THROW(solve_sde({0.0}, zero_drift(1), U), DomainError);
}

TEST(EstimatePt, ConstantIsExact) {
  MonteCarloOptions opt;
  opt.n_paths = 500;
  const auto e = estimate_pt(FunctionDescriptor::constant(1.0), {0.2}, 1.0, identity_model(1, 0.3), zero_drift(1), opt);
  EXPECT_EQ(e.mean, 1.0);
  EXPECT_EQ(e.se, 0.0);
}

TEST(EstimatePt, MeansOfLinearModels) {
  MonteCarloOptions opt;
  opt.n_paths = 10000;
  opt.steps = 32;
  opt.seed = 4;
  const auto f = FunctionDescriptor::coord(0);
  const auto a = estimate_pt(f, {0.7}, 1.0, identity_model(1, 0.3), zero_drift(1), opt);
  EXPECT_LT(std::abs(a.mean - 0.7), 4.0 * a.se);
  NoiseModel st = identity_model(1, 0.3);
  st.clocks = {ClockSpec::subordinator(BernsteinSpec::stable(0.5))};
  const auto b = estimate_pt(f, {0.7}, 1.0, identity_model(1, 0.3), linear_drift(1, 1.0), opt);
  EXPECT_LT(std::abs(b.mean - 0.7 * std::exp(-1.0)), 4.0 * b.se);
  const auto c = estimate_pt(f, {0.7}, 1.0, st, linear_drift(1, 1.0), opt);
  EXPECT_LT(std::abs(c.mean - 0.7 * std::exp(-1.0)), 4.0 * c.se);
}

TEST(EstimatePt, BoundedFunctionStaysInRange) {
  MonteCarloOptions opt;
  opt.n_paths = 2000;
  const auto f = FunctionDescriptor::tanh(FunctionDescriptor::coord(0)) * FunctionDescriptor::constant(2.0);
  const auto e = estimate_pt(f, {5.0}, 1.0, identity_model(1, 0.2), cubic_drift(1, 0.1), opt);
  EXPECT_LE(std::abs(e.mean), 2.0);
}

TEST(EstimateGradient, Cases) {
  MonteCarloOptions opt;
  opt.n_paths = 5000;
  opt.steps = 32;
  const auto m = identity_model(1, 0.3);
  const auto c = estimate_gradient(FunctionDescriptor::constant(3.0), {0.1}, {1.0}, 1e-3, 1.0, m, linear_drift(1, 1.0), opt);
  EXPECT_EQ(c.slope.mean, 0.0);
  EXPECT_EQ(c.slope.se, 0.0);
  const auto z = estimate_gradient(FunctionDescriptor::coord(0), {0.1}, {1.0}, 1e-3, 1.0, m, zero_drift(1), opt);
  EXPECT_NEAR(z.slope.mean, 1.0, 1e-9);
  EXPECT_NEAR(z.slope.se, 0.0, 1e-9);
  const auto l = estimate_gradient(FunctionDescriptor::coord(0), {0.1}, {1.0}, 1e-3, 1.0, m, linear_drift(1, 1.0), opt);
  // linear flow: the slope is deterministic up to ODE tolerance
  EXPECT_NEAR(l.slope.mean, std::exp(-1.0), 1e-4);
  EXPECT_THROW(estimate_gradient(FunctionDescriptor::coord(0), {0.1}, {2.0}, 1e-3, 1.0, m, zero_drift(1), opt), DomainError);
}

TEST(NoiseSampler, VarianceUnderRepresentationScale) {
  const auto g = TimeGrid::uniform(1.0, 4);
  NoiseModel m = identity_model(1, 0.3);
  const NoiseSampler rep(m, g);
  m.scale = NoiseScale::unit_fbm;
  const NoiseSampler unit(m, g);
  std::vector<double> a(20000), b(20000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::pow(rep.sample(1, i)(4), 2);
    b[i] = std::pow(unit.sample(1, i)(4), 2);
  }
  const auto ea = mean_se(a), eb = mean_se(b);
  EXPECT_LT(std::abs(ea.mean - representation_variance(HurstExponent(0.3))), 4.0 * ea.se);
  EXPECT_LT(std::abs(eb.mean - 1.0), 4.0 * eb.se);
}

TEST(NoiseSampler, DeterministicAcrossCalls) {
  NoiseModel m = identity_model(2, 0.3);
  m.clocks = {ClockSpec::subordinator(BernsteinSpec::stable(0.5))};
  m.v = VSpec::jumps(2.0, 0.5);
  const NoiseSampler ns(m, TimeGrid::uniform(1.0, 16));
  EXPECT_EQ(ns.sample(5, 3).values, ns.sample(5, 3).values);
  EXPECT_NE(ns.sample(5, 3).values, ns.sample(5, 4).values);
}

TEST(FunctionDescriptor, EvaluationAndRange) {
  using F = FunctionDescriptor;
  const auto f = F::constant(1.0) + F::clamp(F::coord(0), 0.0, 1.0);
  const double z1[] = {0.25}, z2[] = {-3.0}, z3[] = {9.0};
  EXPECT_EQ(f(z1), 1.25);
  EXPECT_EQ(f(z2), 1.0);
  EXPECT_EQ(f(z3), 2.0);
  EXPECT_EQ(f.range().lo, 1.0);
  EXPECT_EQ(f.range().hi, 2.0);
  EXPECT_NO_THROW(f.require_range(1.0, "log"));
  EXPECT_THROW(F::coord(0).require_range(0.0, "power"), DomainError);
  EXPECT_THROW(F::sin(F::coord(0)).require_range(0.0, "power"), DomainError);
  auto n = F::norm();
  n.bind_dimension(2);
  const double v[] = {3.0, 4.0};
  EXPECT_DOUBLE_EQ(n(v), 5.0);
  auto g = F::coord(2);
  EXPECT_THROW(g.bind_dimension(2), DomainError);
}

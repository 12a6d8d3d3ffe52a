#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tcfbm/error.hpp"
#include "tcfbm/specfun.hpp"

using namespace tcfbm;

namespace {
double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }
}  // namespace

TEST(Gamma, ElementaryValues) {
  EXPECT_NEAR(gamma_fn(1.0), 1.0, 1e-14);
  EXPECT_NEAR(gamma_fn(0.5), std::sqrt(M_PI), 1e-14);
  EXPECT_NEAR(gamma_fn(5.0), 24.0, 1e-12);
}

// mpmath, 50 digits
TEST(Gamma, HighPrecisionOracle) {
  EXPECT_LT(rel(gamma_fn(50.0), 6.0828186403426756087e+62), 1e-12);
  EXPECT_LT(rel(gamma_fn(0.001), 999.4237724845954453), 1e-12);
  EXPECT_LT(rel(gamma_fn(7.3), 1271.4236336639088399), 1e-12);
}

TEST(Gamma, Recurrence) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> U(0.1, 20.0);
  for (int i = 0; i < 100; ++i) {
    const double x = U(gen);
    EXPECT_LT(rel(gamma_fn(x + 1.0), x * gamma_fn(x)), 1e-11) << x;
  }
}

TEST(Gamma, ReflectionForNegativeArguments) {
  EXPECT_LT(rel(gamma_reflect(-0.5), -2.0 * std::sqrt(M_PI)), 1e-12);
  EXPECT_THROW(gamma_reflect(-2.0), DomainError);
  EXPECT_THROW(gamma_fn(-0.5), DomainError);
}

TEST(Beta, Values) {
  EXPECT_NEAR(beta_fn(1.0, 1.0), 1.0, 1e-14);
  EXPECT_NEAR(beta_fn(2.0, 2.0), 1.0 / 6.0, 1e-14);
  EXPECT_LT(rel(beta_fn(1.25, 0.25), 3.7081493546027438369), 1e-12);
}

TEST(Beta, Symmetric) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> U(0.05, 8.0);
  for (int i = 0; i < 50; ++i) {
    const double a = U(gen), b = U(gen);
    EXPECT_EQ(beta_fn(a, b), beta_fn(b, a));
  }
}

TEST(Hyp2f1, TrivialCases) {
  EXPECT_EQ(hyp2f1(0.3, 0.4, 1.2, 0.0), 1.0);
  EXPECT_EQ(hyp2f1(0.0, 0.4, 1.2, -3.0), 1.0);
  EXPECT_NEAR(hyp2f1(1.0, 1.0, 2.0, -1.0), std::log(2.0), 1e-13);
}

TEST(Hyp2f1, MpmathOracle) {
  struct Case {
    double a, b, c, z, v;
  };
  const Case cases[] = {
      {0.3, 0.7, 1.9, -0.5, 0.95312243674087472743},
      {-0.2, 0.2, 0.8, -3.0, 1.0952396950184910994},
      {-0.25, 0.25, 0.75, -1e6, 18.960071877249533183},
      {1.5, 2.5, 3.2, -40.0, 0.0070923756483468878659},
      {0.5, 1.0, 1.5, -0.99, 0.7868296229803289175},
      {-0.4, 0.4, 0.6, -1e9, 3111.6925763788282731},
      {0.2, 0.2, 1.2, -7.0, 0.90598749473445026207},
  };
  for (const auto& c : cases) EXPECT_LT(rel(hyp2f1(c.a, c.b, c.c, c.z), c.v), 1e-10) << c.z;
}

TEST(Hyp2f1, PfaffAgreesWithDirectSeries) {
  for (double z = -0.95; z <= 0.0; z += 0.05) {
    const double direct = hyp2f1_series(0.3, -0.3, 0.8, z);
    EXPECT_LT(rel(hyp2f1(0.3, -0.3, 0.8, z), direct), 1e-9) << z;
  }
}

TEST(Hyp2f1, RejectsPositiveArgument) { EXPECT_THROW(hyp2f1(0.3, 0.3, 1.0, 0.5), DomainError); }

TEST(Hurst, Validation) {
  EXPECT_THROW(HurstExponent(0.5), DomainError);
  EXPECT_THROW(HurstExponent(0.0), DomainError);
  EXPECT_THROW(HurstExponent(0.7), DomainError);
  EXPECT_NO_THROW(HurstExponent(0.49));
  try {
    HurstExponent h(0.5);
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("(0,1/2)"), std::string::npos);
  }
}

TEST(ThetaH, OracleValues) {
  EXPECT_LT(rel(theta_h(HurstExponent(0.25)), 0.34868320668436721632), 1e-12);
  EXPECT_LT(rel(kernel_constant(HurstExponent(0.25)), 1.0227656721131686716), 1e-12);
  EXPECT_LT(rel(theta_h(HurstExponent(0.4999)), 0.49995770868260680257), 1e-10);
  EXPECT_GT(theta_h(HurstExponent(0.4999)), 0.499);
  EXPECT_LT(theta_h(HurstExponent(0.4999)), 0.501);
  EXPECT_LT(rel(kernel_constant(HurstExponent(0.4999)), 1.0000576985597814125), 1e-10);
  struct Row {
    double h, theta, kc;
  };
  const Row rows[] = {{0.1, 0.25208424847995924222, 0.9526296733399885515},
                      {0.2, 0.31527282704148641479, 1.0044267253178584074},
                      {0.3, 0.38245596028921464289, 1.0348317200442789539},
                      {0.4, 0.44732698583094942593, 1.0361393564546607755},
                      {0.45, 0.47596135127428715675, 1.0232863591407010588}};
  for (const auto& r : rows) {
    EXPECT_LT(rel(theta_h(HurstExponent(r.h)), r.theta), 1e-12) << r.h;
    EXPECT_LT(rel(kernel_constant(HurstExponent(r.h)), r.kc), 1e-12) << r.h;
  }
}

TEST(ThetaH, ConsistentWithKernelConstant) {
  for (double h : {0.1, 0.3, 0.45}) {
    const HurstExponent H(h);
    const double kc = kernel_constant(H);
    EXPECT_LT(rel(kc * kc / (4.0 * (1.0 - h)), theta_h(H)), 1e-13);
  }
}

TEST(ThetaH, PositiveOnGrid) {
  for (int i = 0; i < 50; ++i) {
    const double h = 0.01 + 0.48 * i / 49.0;
    const double t = theta_h(HurstExponent(h));
    EXPECT_TRUE(std::isfinite(t));
    EXPECT_GT(t, 0.0);
  }
}

#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "tcfbm/fbm.hpp"

using namespace tcfbm;
using tcfbm::testing::covariance_check;
using tcfbm::testing::draw_rows;

TEST(FbmCovariance, Values) {
  for (double h : {0.1, 0.3, 0.45}) {
    EXPECT_DOUBLE_EQ(fbm_covariance(h, 1.0, 1.0), 1.0);
    EXPECT_EQ(fbm_covariance(h, 2.0, 0.0), 0.0);
  }
  EXPECT_DOUBLE_EQ(fbm_covariance(0.5, 2.0, 1.0), 1.0);
  EXPECT_NEAR(fbm_covariance(0.3, 0.7, 1.9), 0.5 * (std::pow(0.7, 0.6) + std::pow(1.9, 0.6) - std::pow(1.2, 0.6)), 1e-15);
}

TEST(FbmAt, ZeroAtOrigin) {
  const auto p = fbm_at(0.3, {0.0}, 3, 11);
  ASSERT_EQ(p.values.size(), 3u);
  for (double v : p.values) EXPECT_EQ(v, 0.0);
}

TEST(FbmAt, UnitVarianceAtOne) {
  const FbmCholeskySampler s(0.3, {1.0});
  std::vector<double> sq(100000);
  for (std::size_t i = 0; i < sq.size(); ++i) {
    Rng rng(2024, Stream::fbm, i);
    double v;
    s.sample(rng, &v);
    sq[i] = v * v;
  }
  const auto e = mean_se(sq);
  EXPECT_LT(std::abs(e.mean - 1.0), 4.0 * e.se);
}

TEST(FbmAt, SelfSimilarity) {
  const FbmCholeskySampler s(0.25, {1.0, 4.0});
  const std::size_t n = 50000;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(8, Stream::fbm, i);
    double v[2];
    s.sample(rng, v);
    d[i] = v[1] * v[1] - std::pow(4.0, 0.5) * v[0] * v[0];
  }
  const auto e = mean_se(d);
  EXPECT_LT(std::abs(e.mean), 4.0 * e.se);
}

TEST(FbmAt, CholeskyCovarianceNonuniform) {
  const std::vector<double> t{0.0, 0.05, 0.3, 0.31, 0.9, 1.4, 2.0, 3.5};
  for (double h : {0.1, 0.3, 0.45}) {
    const FbmCholeskySampler s(h, t);
    const auto rows = draw_rows(s, t.size(), 20000, 77, Stream::fbm);
    const auto c = covariance_check(rows, t.size(), [&](std::size_t i, std::size_t j) { return fbm_covariance(h, t[i], t[j]); });
    EXPECT_LT(c.worst_z, 4.5) << h;
  }
}

TEST(FbmAt, RepeatedTimesBroadcast) {
  const std::vector<double> t{0.0, 0.5, 0.5, 1.0, 1.0, 1.0, 2.0};
  const auto p = fbm_at(0.2, t, 2, 3);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(p.values[0 * 2 + k], 0.0);
    EXPECT_EQ(p.values[1 * 2 + k], p.values[2 * 2 + k]);
    EXPECT_EQ(p.values[3 * 2 + k], p.values[4 * 2 + k]);
    EXPECT_EQ(p.values[3 * 2 + k], p.values[5 * 2 + k]);
  }
}

TEST(FbmAt, Deterministic) {
  const std::vector<double> t{0.0, 0.2, 0.7, 1.0};
  const auto a = fbm_at(0.3, t, 2, 99, 5), b = fbm_at(0.3, t, 2, 99, 5), c = fbm_at(0.3, t, 2, 99, 6);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
}

TEST(FbmAt, CoordinatesIndependent) {
  const std::vector<double> t{0.0, 0.5, 1.0};
  const std::size_t n = 20000;
  std::vector<double> prod(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = fbm_at(0.3, t, 2, 1, i);
    prod[i] = p.values[2 * 2 + 0] * p.values[2 * 2 + 1];
  }
  const auto e = mean_se(prod);
  EXPECT_LT(std::abs(e.mean), 4.0 * e.se);
}

TEST(FbmAt, IncrementStationarity) {
  const double h = 0.3, dt = 0.25;
  const std::vector<double> t{0.0, 0.25, 1.0, 1.25, 3.0, 3.25};
  const FbmCholeskySampler s(h, t);
  const std::size_t n = 20000;
  for (std::size_t a : {0u, 2u, 4u}) {
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(13, Stream::fbm, i);
      double v[6];
      s.sample(rng, v);
      d[i] = (v[a + 1] - v[a]) * (v[a + 1] - v[a]);
    }
    const auto e = mean_se(d);
    EXPECT_LT(std::abs(e.mean - std::pow(dt, 2 * h)), 4.0 * e.se) << a;
  }
}

TEST(FbmVolterra, OneCellVariance) {
  const HurstExponent H(0.3);
  const TimeGrid g({0.0, 1.5});
  const FbmVolterraSampler unit(H, g), rep(H, g, NoiseScale::representation);
  const std::size_t n = 30000;
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v[2];
    Rng r1(4, Stream::brownian, i);
    unit.sample(r1, v);
    a[i] = v[1] * v[1];
    Rng r2(4, Stream::brownian, i);
    rep.sample(r2, v);
    b[i] = v[1] * v[1];
  }
  const auto ea = mean_se(a), eb = mean_se(b);
  EXPECT_LT(std::abs(ea.mean - std::pow(1.5, 0.6)), 4.0 * ea.se);
  EXPECT_LT(std::abs(eb.mean - kernel_square_integral(H, 1.5)), 4.0 * eb.se);
}

TEST(FbmVolterra, NearBrownian) {
  const HurstExponent H(0.4999);
  const auto g = TimeGrid::uniform(2.0, 4);
  const FbmVolterraSampler s(H, g);
  const auto rows = draw_rows(s, g.size(), 20000, 5, Stream::brownian);
  const auto c = covariance_check(rows, g.size(), [&](std::size_t i, std::size_t j) { return std::min(g[i], g[j]); });
  EXPECT_LT(c.worst_z, 4.5);
}

TEST(FbmVolterra, CovarianceMatchesExact) {
  const TimeGrid g({0.0, 0.1, 0.25, 0.5, 0.8, 1.0, 1.6, 2.0});
  for (double h : {0.1, 0.3, 0.45}) {
    const FbmVolterraSampler s(HurstExponent(h), g);
    const auto rows = draw_rows(s, g.size(), 20000, 21, Stream::brownian);
    const auto c = covariance_check(rows, g.size(), [&](std::size_t i, std::size_t j) { return fbm_covariance(h, g[i], g[j]); });
    EXPECT_LT(c.worst_z, 4.5) << h;
  }
}

TEST(FbmVolterra, Deterministic) {
  const auto g = TimeGrid::uniform(1.0, 8);
  const auto a = fbm_volterra(HurstExponent(0.2), g, 3, 2), b = fbm_volterra(HurstExponent(0.2), g, 3, 2);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.values[0], 0.0);
  EXPECT_EQ(a.values[1], 0.0);
}

TEST(UniformVolterra, MatchesCovarianceOnClockGrid) {
  const HurstExponent H(0.3);
  const std::size_t n = 32;
  const double dt = 1.0 / n;
  const UniformVolterra uv(H, n, dt, NoiseScale::unit_fbm);
  const std::size_t paths = 20000;
  std::vector<double> rows(paths * 3);
  std::vector<double> dW(n), out(n + 1);
  std::normal_distribution<double> nd;
  for (std::size_t r = 0; r < paths; ++r) {
    Rng rng(6, Stream::brownian, r);
    for (auto& w : dW) w = nd(rng) * std::sqrt(dt);
    uv.apply(dW.data(), 1, out.data());
    rows[r * 3 + 0] = out[8];
    rows[r * 3 + 1] = out[16];
    rows[r * 3 + 2] = out[32];
  }
  const double t[3] = {0.25, 0.5, 1.0};
  const auto c = covariance_check(rows, 3, [&](std::size_t i, std::size_t j) { return fbm_covariance(0.3, t[i], t[j]); });
  // piecewise-linear Brownian data on 32 cells: allow a small discretization bias on top of 4 SE
  EXPECT_LT(c.worst_abs, 0.03);
}

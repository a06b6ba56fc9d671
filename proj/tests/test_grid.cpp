#include <gtest/gtest.h>

#include <cmath>

#include "machlab/config.hpp"
#include "machlab/grid.hpp"
#include "machlab/stencil.hpp"

using namespace machlab;

TEST(Stencil, CenteredFirstDerivativeWeights) {
  const std::vector<double> x{-1.0, 0.0, 1.0};
  const auto w = fd_weights(0.0, x, 1);
  EXPECT_NEAR(w[0], -0.5, 1e-15);
  EXPECT_NEAR(w[1], 0.0, 1e-15);
  EXPECT_NEAR(w[2], 0.5, 1e-15);
}

TEST(Stencil, RadialOperatorExactOnPolynomials) {
  std::vector<double> x(20);
  for (int i = 0; i < 20; ++i) x[i] = 1.0 + 0.1 * i;
  RadialOperator d1(x, 1, 6), d2(x, 2, 6);
  std::vector<double> f(20), df(20), d2f(20);
  for (int i = 0; i < 20; ++i) f[i] = std::pow(x[i], 6);
  d1.apply(f, df, 1);
  d2.apply(f, d2f, 1);
  for (int i = 0; i < 20; ++i) {
    EXPECT_NEAR(df[i], 6 * std::pow(x[i], 5), 1e-8 * std::pow(x[i], 5));
    EXPECT_NEAR(d2f[i], 30 * std::pow(x[i], 4), 1e-6 * std::pow(x[i], 4));
  }
}

TEST(Boundary, ParsesModes) {
  auto c = BoundaryCurve::parse("3:0.1, 2:0:0.05");
  ASSERT_EQ(c.modes().size(), 2u);
  EXPECT_EQ(c.max_mode(), 3);
  EXPECT_NEAR(c.radius(0.0), 1.1, 1e-15);
  EXPECT_THROW(BoundaryCurve::parse("x:1"), Error);
}

TEST(Boundary, DerivativesMatchFiniteDifferences) {
  BoundaryCurve c({{3, 0.1, 0.02}, {5, 0.0, 0.03}});
  const double t = 0.7, h = 1e-5;
  for (int d = 1; d <= 3; ++d) {
    const double fd = (c.radius(t + h, d - 1) - c.radius(t - h, d - 1)) / (2 * h);
    EXPECT_NEAR(c.radius(t, d), fd, 1e-6);
  }
}

TEST(Domain, RejectsTooSmallOuterRadius) {
  Config cfg = Config::parse("geometry.r_outer = 3\n");
  EXPECT_THROW(ExteriorDomain::from_config(cfg), Error);
}

TEST(Grid, NodesAndMetricOnCircle) {
  auto g = make_grid(ExteriorDomain{}, 64, 32);
  EXPECT_NEAR(g->r()[g->index(0, 5)], 1.0, 1e-15);
  EXPECT_NEAR(g->r()[g->index(63, 5)], 8.0, 1e-13);
  EXPECT_NEAR(g->rho_x()[g->index(10, 0)], 1.0, 1e-15);
  EXPECT_EQ(g->sponge_start_index(), 45);
}

TEST(Grid, QuadratureIntegratesArea) {
  ExteriorDomain d;
  auto g = make_grid(d, 128, 64);
  double area = 0.0;
  for (double w : g->quadrature()) area += w;
  const double rs = g->rho()[g->sponge_start_index()];
  EXPECT_NEAR(area, kPi * (rs * rs - 1.0), 1e-10);
}

TEST(Grid, PerturbedMetricMatchesNumericalJacobian) {
  ExteriorDomain d;
  d.boundary = BoundaryCurve({{3, 0.1, 0.0}});
  auto g = make_grid(d, 64, 64);
  // ∇ρ·(∂x/∂ρ) = 1 and ∇θ·(∂x/∂ρ) = 0
  const int i = 20, j = 7;
  const std::size_t k = g->index(i, j);
  const double t = g->theta()[j];
  const double s = (d.r_outer - d.boundary.radius(t)) / (d.r_outer - 1.0);
  const double xr = s * std::cos(t), yr = s * std::sin(t);
  EXPECT_NEAR(g->rho_x()[k] * xr + g->rho_y()[k] * yr, 1.0, 1e-13);
  EXPECT_NEAR(g->theta_x()[k] * xr + g->theta_y()[k] * yr, 0.0, 1e-13);
}

TEST(ThetaFFT, SpectralDerivativeOfTrigPolynomial) {
  auto g = make_grid(ExteriorDomain{}, 16, 32);
  std::vector<double> f(g->size()), df(g->size());
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 32; ++j) f[g->index(i, j)] = std::sin(3 * g->theta()[j]) * (i + 1);
  g->apply_d_theta(f, df, 1);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 32; ++j) EXPECT_NEAR(df[g->index(i, j)], 3 * std::cos(3 * g->theta()[j]) * (i + 1), 1e-12);
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "machlab/geometry.hpp"

using namespace machlab;

namespace {

ExteriorDomain perturbed(const std::string& coeffs) {
  ExteriorDomain d;
  d.boundary = BoundaryCurve::parse(coeffs);
  return d;
}

// Frame of ψ = |x|² − 1 built through the library path.
TangentialFrame quadratic_frame(const GridPtr& g, const SignedDistanceField& sdf) {
  DefiningFunction psi;
  psi.psi = ScalarField::from_function(g, [](double x, double y) { return x * x + y * y - 1.0; });
  return build_frame(psi, sdf, g->domain());
}

double gaussian(double x, double y, double s2) { return std::exp(-(x * x + y * y) / (2.0 * s2)); }

}  // namespace

TEST(SignedDistance, UnitCircleIsRadiusMinusOne) {
  auto g = make_grid(ExteriorDomain{}, 64, 32);
  const auto sdf = signed_distance(g);
  for (std::size_t k = 0; k < g->size(); ++k) {
    const double r = g->r()[k];
    EXPECT_NEAR(sdf.d[k], r - 1.0, 1e-14);
    EXPECT_NEAR(sdf.gradient.x[k], g->x()[k] / r, 1e-14);
    EXPECT_NEAR(sdf.gradient.y[k], g->y()[k] / r, 1e-14);
  }
  for (int j = 0; j < g->n_theta(); ++j) EXPECT_EQ(sdf.d.at(0, j), 0.0);
}

TEST(SignedDistance, NewtonProjectionMatchesBruteForce) {
  const auto dom = perturbed("3:0.1");
  BoundaryProjector proj(dom.boundary);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> th(0.0, kTwoPi), rad(1.15, 2.5);
  for (int s = 0; s < 60; ++s) {
    const double t = th(rng), r = rad(rng);
    const Vec2 x{r * std::cos(t), r * std::sin(t)};
    const double dn = std::sqrt(proj.dist2(x, proj.project(x)));
    double brute = 1e300;
    constexpr int n = 200000;
    for (int m = 0; m < n; ++m) brute = std::min(brute, proj.dist2(x, kTwoPi * m / n));
    EXPECT_NEAR(dn, std::sqrt(brute), 1e-8);
  }
}

TEST(SignedDistance, PerturbedGridValuesArePositiveAndUnitGradient) {
  auto g = make_grid(perturbed("3:0.1"), 128, 64);
  const auto sdf = signed_distance(g);
  const auto mask = collar_mask(sdf, 0.5);
  const VectorField gd = grad(sdf.d);
  const double h = g->drho();
  for (std::size_t k = 0; k < g->size(); ++k) {
    if (k >= static_cast<std::size_t>(g->n_theta())) EXPECT_GT(sdf.d[k], 0.0);
    if (mask[k] && k >= static_cast<std::size_t>(g->n_theta()))
      EXPECT_NEAR(std::hypot(gd.x[k], gd.y[k]), 1.0, 10 * h * h);
  }
}

TEST(SignedDistance, UnresolvedBoundaryIsAGeometryError) {
  auto g = make_grid(perturbed("12:0.01"), 32, 64);
  try {
    signed_distance(g);
    FAIL() << "expected a geometry error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::geometry);
  }
}

TEST(Normal, UnitCircleCollarIsMinusRadial) {
  ExteriorDomain dom;
  auto g = make_grid(dom, 128, 32);
  const auto sdf = signed_distance(g);
  const auto nu = extend_normal(sdf, dom);
  for (int i = 0; i < g->n_r(); ++i) {
    const std::size_t k = g->index(i, 0);
    if (sdf.d[k] > dom.collar_width) break;
    EXPECT_NEAR(nu.x[k], -1.0, 1e-14);
    EXPECT_NEAR(nu.y[k], 0.0, 1e-14);
  }
  for (std::size_t k = 0; k < g->size(); ++k)
    if (sdf.d[k] >= 2 * dom.collar_width) EXPECT_EQ(nu.x[k], 0.0);
}

TEST(Normal, PerturbedNormalIsOrthogonalToBoundaryTangent) {
  const auto dom = perturbed("2:0.05, 3:0:0.02");
  auto g = make_grid(dom, 128, 64);
  const auto nu = extend_normal(signed_distance(g), dom);
  for (int j = 0; j < g->n_theta(); ++j) {
    const Vec2 t = dom.boundary.tangent(g->theta()[j]);
    const std::size_t k = g->index(0, j);
    EXPECT_LE(std::abs(nu.x[k] * t.x + nu.y[k] * t.y), 1e-6);
    EXPECT_NEAR(std::hypot(nu.x[k], nu.y[k]), 1.0, 1e-12);
  }
}

TEST(Mollify, RejectsNonPositiveParameter) {
  auto f = CartesianField::box(1.0, 0.1);
  EXPECT_THROW(mollify_defining(f, 0.0), Error);
  auto g = make_grid(ExteriorDomain{}, 32, 16);
  EXPECT_THROW(mollify_to_grid(f, -1.0, g), Error);
}

TEST(Mollify, ConstantIsPreservedAwayFromTheBoxEdge) {
  auto f = CartesianField::box(1.0, 0.01);
  f.fill([](double, double) { return 1.0; });
  const auto m = mollify_defining(f, 1e-3);
  EXPECT_NEAR(m.at(f.nx / 2, f.ny / 2), 1.0, 1e-10);
}

TEST(Mollify, GaussianVarianceAdds) {
  const double s2 = 0.05, e = 2e-3;
  auto f = CartesianField::box(2.0, 0.01);
  f.fill([&](double x, double y) { return gaussian(x, y, s2); });
  const auto m = mollify_defining(f, e);
  const double v = s2 + 2 * e;
  double worst = 0.0;
  for (int iy = 0; iy < f.ny; iy += 7)
    for (int ix = 0; ix < f.nx; ix += 7)
      worst = std::max(worst, std::abs(m.at(ix, iy) - (s2 / v) * gaussian(f.x(ix), f.y(iy), v)));
  EXPECT_LE(worst, 1e-9);
}

TEST(Mollify, GridSumMatchesQuadratureConvolution) {
  // Smooth bump seed; the oracle convolves the continuous seed by trapezoid
  // quadrature on a lattice unrelated to the seed box.
  auto seed = [](double x, double y) {
    const double r = std::hypot(x, y);
    return smooth_cutoff(r, 1.5, 3.0) * std::cos(x) * (1.0 + 0.3 * y);
  };
  const double e = 1e-4;
  auto d0 = CartesianField::box(3.5, 0.004);
  d0.fill(seed);
  auto g = make_grid(ExteriorDomain{}, 32, 16);
  const auto de = mollify_to_grid(d0, e, g);
  const double s = std::sqrt(2 * e), q = s / 17.0;
  const int half = static_cast<int>(std::ceil(10 * s / q));
  double worst_oracle = 0.0, worst_seed = 0.0;
  for (std::size_t k = 0; k < g->size(); k += 5) {
    const double x = g->x()[k], y = g->y()[k];
    double acc = 0.0;
    for (int a = -half; a <= half; ++a)
      for (int b = -half; b <= half; ++b) {
        const double u = a * q, v = b * q;
        acc += std::exp(-(u * u + v * v) / (4 * e)) * seed(x - u, y - v);
      }
    acc *= q * q / (4 * kPi * e);
    worst_oracle = std::max(worst_oracle, std::abs(de[k] - acc));
    worst_seed = std::max(worst_seed, std::abs(de[k] - seed(x, y)));
  }
  EXPECT_LE(worst_oracle, 1e-8);
  EXPECT_LE(worst_seed, 1e-3);
}

TEST(Mollify, DerivativeSupsDecreaseWithSmoothing) {
  DefiningOptions o;
  o.eps_moll = 1e-3;
  o.max_spacing = 0.02;
  auto d0 = defining_seed(ExteriorDomain{}, o);
  const int margin = static_cast<int>(std::ceil(0.5 / d0.h));
  for (int m = 1; m <= 4; ++m) {
    double prev = 1e300;
    for (double e : {1e-3, 3e-3, 1e-2, 3e-2}) {
      const double s = cartesian_derivative_sup(mollify_defining(d0, e), m, margin);
      EXPECT_LE(s, prev * (1 + 1e-9)) << "m = " << m << ", eps = " << e;
      prev = s;
    }
  }
}

TEST(Frame, QuadraticDefiningFunctionGivesRotation) {
  auto g = make_grid(ExteriorDomain{}, 128, 64);
  const auto sdf = signed_distance(g);
  const auto fr = quadratic_frame(g, sdf);
  const ScalarField x1 = ScalarField::from_function(g, [](double x, double) { return x; });
  const ScalarField t = apply_tangential(fr, x1);
  for (std::size_t k = 0; k < g->size(); ++k) EXPECT_NEAR(t[k], -2 * g->y()[k], 1e-9 * g->r()[k]);
  EXPECT_LE(tangency_residual(fr, sdf), 1e-12);
}

TEST(Frame, RecoveryIdentityOnBilinearField) {
  auto g = make_grid(ExteriorDomain{}, 256, 64);
  const auto sdf = signed_distance(g);
  const auto fr = quadratic_frame(g, sdf);
  const auto f = ScalarField::from_function(g, [](double x, double y) { return x * y; });
  const auto df = VectorField::from_function(g, [](double x, double y) { return Vec2{y, x}; });
  EXPECT_LE(span_residual(fr, f, df), 1e-8);
}

TEST(Frame, DegenerateDefiningFunctionIsRejected) {
  auto g = make_grid(ExteriorDomain{}, 64, 32);
  const auto sdf = signed_distance(g);
  DefiningFunction psi;
  psi.psi = ScalarField::from_function(g, [](double x, double y) { return 1e-3 * (x * x + y * y - 1.0); });
  try {
    build_frame(psi, sdf, g->domain());
    FAIL() << "expected a geometry error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::geometry);
  }
}

TEST(Frame, MollifiedCircleTangencyAndRefinement) {
  double prev = 0.0;
  for (int n : {128, 256}) {
    const auto geo = build_geometry(ExteriorDomain{}, n, n / 2);
    const double h = geo.grid->drho();
    const double t = tangency_residual(geo.frame, geo.sdf);
    EXPECT_LE(t, 10 * h * h);
    EXPECT_GT(geo.defining.grad_lower_bound, 0.5);
    for (int j = 0; j < geo.grid->n_theta(); ++j) EXPECT_LE(std::abs(geo.defining.psi.at(0, j)), 1e-12);
    if (n == 256) EXPECT_LE(t, std::max(prev / 16, 1e-14));
    prev = t;
  }
}

TEST(Frame, CorruptedFrameIsDetected) {
  const auto geo = build_geometry(ExteriorDomain{}, 64, 32);
  TangentialFrame bad = geo.frame;
  const auto& g = *geo.grid;
  for (std::size_t k = 0; k < g.size(); ++k) {
    bad.b.x[k] += 0.1 * g.x()[k] / g.r()[k];
    bad.b.y[k] += 0.1 * g.y()[k] / g.r()[k];
  }
  EXPECT_GE(tangency_residual(bad, geo.sdf), 0.05);
}

TEST(Frame, SpanRecoveryOnRandomPolynomials) {
  const auto geo = build_geometry(perturbed("2:0.05"), 256, 128);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  for (int s = 0; s < 20; ++s) {
    const double a = c(rng), b = c(rng), d = c(rng), e = c(rng), f = c(rng);
    const auto p = ScalarField::from_function(
        geo.grid, [&](double x, double y) { return a * x + b * y + d * x * x + e * x * y + f * y * y * y; });
    const auto dp = VectorField::from_function(
        geo.grid, [&](double x, double y) { return Vec2{a + 2 * d * x + e * y, b + e * x + 3 * f * y * y}; });
    EXPECT_LE(span_residual(geo.frame, p, dp), 1e-6) << "field " << s;
  }
}

TEST(Frame, AnalyticityRadiusOfDefiningFunctionIsGridIndependent) {
  std::vector<double> radii;
  for (int n : {128, 256}) {
    const auto geo = build_geometry(ExteriorDomain{}, n, n / 2);
    radii.push_back(analyticity_radius(geo.defining.psi, geo.frame.valid_region, 8));
  }
  EXPECT_GT(radii[0], 0.05);
  EXPECT_GT(radii[1], 0.05);
  EXPECT_NEAR(radii[1] / radii[0], 1.0, 0.2);
}

#include <gtest/gtest.h>

#include <cmath>

#include "machlab/norms.hpp"
#include "machlab/verify.hpp"

using namespace machlab;

namespace {

GridPtr circle_grid(int nr, int nt) { return make_grid(ExteriorDomain{}, nr, nt); }

// Exact frame of ψ = |x|² − 1: T = 2∂_θ, which annihilates radial fields.
TangentialFrame rotation_frame(const GridPtr& g) {
  TangentialFrame f;
  f.b = VectorField::from_function(g, [](double x, double y) { return Vec2{-2 * y, 2 * x}; });
  f.x0_coeffs = VectorField::from_function(g, [](double x, double y) { return Vec2{2 * x, 2 * y}; });
  f.xi = VectorField(g);
  f.eta = VectorField(g);
  f.valid_region.assign(g->size(), 1);
  return f;
}

// Probabilists' Hermite polynomial He_n.
double hermite(int n, double x) {
  double a = 1.0, b = x;
  if (n == 0) return a;
  for (int k = 1; k < n; ++k) {
    const double c = x * b - k * a;
    a = b;
    b = c;
  }
  return b;
}

double fact(int n) { return n <= 1 ? 1.0 : n * fact(n - 1); }
double choose(int n, int k) { return fact(n) / (fact(k) * fact(n - k)); }

// Steady base field padded with zero time derivatives.
std::vector<std::vector<ScalarField>> steady(const ScalarField& f, int i_max) {
  std::vector<std::vector<ScalarField>> td{{f}};
  for (int i = 1; i <= i_max; ++i) td.push_back({ScalarField(f.grid_ptr())});
  return td;
}

NormParams params(int n_max, int i_max) {
  NormParams p;
  p.N_max = n_max;
  p.I_max = i_max;
  return p;
}

std::vector<DerivativeStack> random_stacks(const GridPtr& g, const TangentialFrame& fr, int n_max) {
  RandomFieldFamily fam(99);
  std::vector<DerivativeStack> out;
  for (int s = 0; s < 5; ++s) {
    std::vector<std::vector<ScalarField>> td;
    for (const auto& f : fam.scalars(3)) td.push_back({f.make(g)});
    out.push_back(build_stack(td, &fr, StackCaps{n_max, n_max, 2}, 0.1));
  }
  return out;
}

}  // namespace

TEST(Tau, LinearDecreaseAndHorizon) {
  NormParams p;
  p.tau0 = 0.5;
  p.K = 1.0;
  EXPECT_DOUBLE_EQ(tau_at(p, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(tau_at(p, 0.25), 0.25);
  p.K = 2.0;
  try {
    tau_at(p, 0.3);
    FAIL() << "expected a parameter error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parameter);
  }
}

TEST(NormParams, RejectsInvalidValues) {
  auto bad = [](const char* text) {
    EXPECT_THROW(NormParams::from_config(Config::parse(text)), Error) << text;
  };
  bad("norms.kappa = 0.9\nnorms.kappa_bar = 0.5");
  bad("norms.K = 0.5");
  bad("norms.tau0 = 1.5");
  bad("norms.N_max = 13");
  bad("norms.I_max = 5");
  EXPECT_NO_THROW(NormParams::from_config(Config::parse("norms.kappa = 0.5\nnorms.kappa_bar = 0.8")));
}

TEST(Weights, ConventionsAndDirectEvaluation) {
  EXPECT_DOUBLE_EQ(weight_A(0, 0, 0, 0.3, 0.7, 0.4), 1.0);
  EXPECT_DOUBLE_EQ(weight_B(0, 0, 0, 0.3, 0.7, 0.4), 1.0);
  EXPECT_NEAR(weight_A(4, 0, 0, 0.3, 0.7, 0.4), std::pow(0.3, 3) * 0.4, 1e-15);
  EXPECT_NEAR(weight_A(2, 3, 1, 0.3, 0.7, 0.4), 0.3 * std::pow(0.7, 3) * std::pow(0.4, 3) / 6.0, 1e-15);
  EXPECT_NEAR(weight_B(2, 3, 1, 0.3, 0.7, 0.4), 0.09 * std::pow(0.7, 3) * std::pow(0.4, 4) / 24.0, 1e-15);
  EXPECT_DOUBLE_EQ(weight_X(2, 0.1), 1.0);
  EXPECT_NEAR(weight_X(5, 0.1), 0.01 / 2.0, 1e-15);
}

TEST(NormA, BaseEntryOnlyIsTheL2Norm) {
  auto g = circle_grid(64, 32);
  const auto f = ScalarField::from_function(g, [](double x, double y) { return std::exp(-(x * x + y * y) / 4) * x; });
  const auto s = build_stack({{f}}, nullptr, StackCaps{0, 0, 0}, 0.1);
  const auto b = norm_A(s, params(0, 0), 0.0);
  EXPECT_NEAR(b.total, l2_norm(f), 1e-14);
  EXPECT_EQ(b.terms.size(), 1u);
  EXPECT_NEAR(norm_X(std::vector<ScalarField>{f}, 0.1, 0).total, l2_norm(f), 1e-14);
}

TEST(NormA, MissingEntryIsANormError) {
  L2Table t;
  t[{0, 0, 0}] = 1.0;
  try {
    norm_A(t, params(2, 0), 0.0);
    FAIL() << "expected a norm error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::norm);
  }
}

TEST(NormA, RadialGaussianMatchesClosedFormDerivatives) {
  const double s2 = 1.0;
  auto g = circle_grid(256, 128);
  const auto fr = rotation_frame(g);
  const auto u = ScalarField::from_function(g, [&](double x, double y) { return std::exp(-(x * x + y * y) / (2 * s2)); });
  // Small τ: the one-sided radial closures leave ~1e−2 relative error in ∂⁶
  // at the wall, which the weights τ^{n−3}/(n−3)! must suppress.
  NormParams p = params(6, 4);
  p.tau0 = 0.1;
  p.K = 1.0;
  const double t = 0.0, tau = p.tau0;
  const auto stack = build_stack(steady(u, 4), &fr, p.caps(), 0.1);
  const double numeric = norm_A(stack, p, t).total;

  // ∂₁^a∂₂^b u = (−1)^{a+b} σ^{−(a+b)} He_a(x/σ) He_b(y/σ) u; T u = 0, ∂ₜu = 0.
  const double sg = std::sqrt(s2);
  double oracle = 0.0;
  for (int j = 0; j <= p.N_max; ++j) {
    double sq = 0.0;
    for (int a = 0; a <= j; ++a) {
      const auto d = ScalarField::from_function(g, [&](double x, double y) {
        return std::pow(-1.0 / sg, j) * hermite(a, x / sg) * hermite(j - a, y / sg) *
               std::exp(-(x * x + y * y) / (2 * s2));
      });
      const double l = l2_norm(d);
      sq += choose(j, a) * l * l;
    }
    const double w = std::pow(p.kappa, std::max(j - 1, 0)) * std::pow(tau, std::max(j - 3, 0)) / fact(j - 3);
    oracle += w * std::sqrt(sq);
  }
  EXPECT_LE(std::abs(numeric - oracle) / oracle, 1e-6) << numeric << " vs " << oracle;
}

TEST(NormA, DominatesNormBAndScalesLinearly) {
  auto g = circle_grid(64, 32);
  const auto fr = rotation_frame(g);
  NormParams p = params(4, 2);
  p.kappa = 0.6;
  p.kappa_bar = 0.8;
  for (const auto& s : random_stacks(g, fr, 4)) {
    const auto t = s.l2_table();
    EXPECT_GE(norm_A(t, p, 0.1).total, norm_B(t, p, 0.1).total);
    L2Table scaled = t;
    for (auto& [idx, v] : scaled) v *= 2.5;
    EXPECT_NEAR(norm_A(scaled, p, 0.1).total, 2.5 * norm_A(t, p, 0.1).total, 1e-12 * norm_A(t, p, 0.1).total);
  }
}

TEST(NormA, TermsMonotoneInParameters) {
  auto g = circle_grid(64, 32);
  const auto fr = rotation_frame(g);
  const auto stacks = random_stacks(g, fr, 4);
  const auto t = stacks[0].l2_table();
  NormParams lo = params(4, 2), hi = params(4, 2);
  lo.kappa = 0.4;
  lo.kappa_bar = 0.5;
  hi.kappa = 0.6;
  hi.kappa_bar = 0.9;
  const auto a = norm_A(t, lo, 0.15), b = norm_A(t, lo, 0.05), c = norm_A(t, hi, 0.05);
  for (const auto& [idx, v] : a.terms) {
    EXPECT_LE(v, b.terms.at(idx) * (1 + 1e-15));  // smaller t means larger τ
    EXPECT_LE(b.terms.at(idx), c.terms.at(idx) * (1 + 1e-15));
  }
}

TEST(NormA, TruncationNeverDecreasesAndTailBoundsTheNextShells) {
  auto g = circle_grid(128, 64);
  const auto fr = rotation_frame(g);
  const auto u = ScalarField::from_function(g, [](double x, double y) {
    return std::exp(-((x - 2.5) * (x - 2.5) + y * y));
  });
  const auto stack = build_stack(steady(u, 2), &fr, StackCaps{8, 8, 2}, 0.1);
  const auto t = stack.l2_table();
  double prev = 0.0;
  for (int n = 0; n <= 8; ++n) {
    const double v = norm_A(t, params(n, std::min(n, 2)), 0.0).total;
    EXPECT_GE(v, prev);
    prev = v;
  }
  const auto b6 = norm_A(t, params(6, 2), 0.0);
  const double n8 = norm_A(t, params(8, 2), 0.0).total;
  EXPECT_GE(b6.tail_bound, n8 - b6.total);
}

TEST(NormY, ZeroFieldAndLowOrderSup) {
  auto g = circle_grid(64, 32);
  const auto s = build_stack(steady(ScalarField(g), 2), nullptr, StackCaps{4, 0, 2}, 0.1);
  EXPECT_EQ(norm_Y(s), 0.0);
  L2Table t;
  t[{1, 0, 0}] = 3.0;
  t[{2, 2, 1}] = 1.0;
  t[{3, 2, 0}] = 7.0;
  EXPECT_EQ(norm_Y(t), 3.0);
}

TEST(NormX, ShellRatioRadiusExceedsDelta) {
  // f = 1/(|x − c|² + 1) has complex singularities at distance 1 from c.
  auto g = circle_grid(256, 128);
  const auto f = ScalarField::from_function(g, [](double x, double y) {
    const double dx = x - 3.0;
    return 1.0 / (dx * dx + y * y + 1.0);
  });
  const double delta = 0.1;
  const auto b = norm_X(std::vector<ScalarField>{f}, delta, 8);
  // term_j ≈ C δ^{j−3} j!/((j−3)! R^j), so R ≈ δ(j+1)/((j−2)·term_{j+1}/term_j).
  const double q = b.shell(8) / b.shell(7);
  const double radius = delta * 8.0 / (5.0 * q);
  EXPECT_GE(radius, delta);
  EXPECT_LT(q, 1.0);
}

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>

#include "machlab/elliptic.hpp"

using namespace machlab;

namespace {

// Dense Chebyshev collocation for −u'' − u'/r + u = f on [1, ro], u(1)=a, u(ro)=b.
// Returns a callable evaluating the polynomial interpolant.
struct ChebyshevBvp {
  int n;
  double lo, hi;
  Eigen::VectorXd nodes, values;

  template <class F>
  ChebyshevBvp(int n_, double lo_, double hi_, F&& f, double a, double b) : n(n_), lo(lo_), hi(hi_) {
    Eigen::VectorXd s(n + 1);
    for (int i = 0; i <= n; ++i) s(i) = std::cos(kPi * i / n);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        const double ci = (i == 0 || i == n) ? 2.0 : 1.0, cj = (j == 0 || j == n) ? 2.0 : 1.0;
        if (i != j) d(i, j) = (ci / cj) * std::pow(-1.0, i + j) / (s(i) - s(j));
      }
    for (int i = 0; i <= n; ++i) {
      double acc = 0.0;
      for (int j = 0; j <= n; ++j)
        if (j != i) acc += d(i, j);
      d(i, i) = -acc;
    }
    const double scale = 2.0 / (hi - lo);
    d *= scale;
    nodes = (s.array() + 1.0) * (hi - lo) / 2.0 + lo;
    Eigen::MatrixXd a_mat = -(d * d);
    Eigen::VectorXd rhs(n + 1);
    for (int i = 0; i <= n; ++i) {
      a_mat.row(i) -= d.row(i) / nodes(i);
      a_mat(i, i) += 1.0;
      rhs(i) = f(nodes(i));
    }
    // node 0 is hi, node n is lo
    a_mat.row(0).setZero();
    a_mat(0, 0) = 1.0;
    rhs(0) = b;
    a_mat.row(n).setZero();
    a_mat(n, n) = 1.0;
    rhs(n) = a;
    values = a_mat.fullPivLu().solve(rhs);
  }

  double operator()(double x) const {
    // barycentric interpolation on Chebyshev points
    double num = 0.0, den = 0.0;
    for (int j = 0; j <= n; ++j) {
      if (std::abs(x - nodes(j)) < 1e-14) return values(j);
      double w = (j % 2 ? -1.0 : 1.0) * ((j == 0 || j == n) ? 0.5 : 1.0);
      w /= (x - nodes(j));
      num += w * values(j);
      den += w;
    }
    return num / den;
  }
};

}  // namespace

TEST(Gmres, SolvesSmallDenseSystem) {
  Eigen::MatrixXd a(3, 3);
  a << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  Eigen::VectorXd b(3);
  b << 1, 2, 3;
  SolveReport rep;
  auto x = gmres([&](const Eigen::VectorXd& in, Eigen::VectorXd& out) { out = a * in; },
                 [](const Eigen::VectorXd& in, Eigen::VectorXd& out) { out = in; }, b, Eigen::VectorXd(), {}, rep);
  EXPECT_LT((a * x - b).norm(), 1e-10);
}

TEST(Helmholtz, ZeroSourceGivesZero) {
  auto g = make_grid(ExteriorDomain{}, 64, 32);
  auto psi = solve_dirichlet_helmholtz(ScalarField(g));
  EXPECT_EQ(max_abs(psi), 0.0);
}

TEST(Helmholtz, RadialSourceMatchesOneDimensionalSolve) {
  auto g = make_grid(ExteriorDomain{}, 256, 16);
  auto src = [](double r) { return std::exp(-(r - 2.0) * (r - 2.0)); };
  auto f = ScalarField::from_function(g, [&](double x, double y) { return src(std::hypot(x, y)); });
  SolveReport rep;
  auto psi = solve_dirichlet_helmholtz(f, nullptr, &rep);
  ChebyshevBvp oracle(120, 1.0, 8.0, src, 0.0, 0.0);
  double err = 0.0;
  for (int i = 0; i < g->n_r(); ++i) err = std::max(err, std::abs(psi.at(i, 3) - oracle(g->rho()[i])));
  EXPECT_LT(err, 1e-8);
}

TEST(Helmholtz, ManufacturedSolutionConverges) {
  auto run = [](int nr) {
    auto g = make_grid(ExteriorDomain{}, nr, 16);
    auto exact = ScalarField::from_function(g, [](double x, double y) {
      const double s = std::hypot(x, y) - 1.0;
      return s * std::exp(-s);
    });
    // (−Δ + 1)ψ* for ψ* = s e^{−s}, s = r − 1: ψ'' = (s − 2)e^{−s}, ψ' = (1 − s)e^{−s}
    auto f = ScalarField::from_function(g, [](double x, double y) {
      const double r = std::hypot(x, y), s = r - 1.0, e = std::exp(-s);
      return -((s - 2) * e + (1 - s) * e / r) + s * e;
    });
    auto psi = solve_dirichlet_helmholtz(f, &exact);
    return max_abs(psi - exact);
  };
  const double e1 = run(128), e2 = run(192), e3 = run(256);
  const double p1 = std::log(e1 / e2) / std::log(191.0 / 127.0);
  const double p2 = std::log(e2 / e3) / std::log(255.0 / 191.0);
  EXPECT_GE(p1, 5.0);
  EXPECT_GE(p2, 5.0);
}

TEST(Helmholtz, PerturbedBoundaryResidual) {
  ExteriorDomain d;
  d.boundary = BoundaryCurve({{3, 0.1, 0.0}});
  auto g = make_grid(d, 128, 64);
  auto f = ScalarField::from_function(g, [](double x, double y) { return std::exp(-0.5 * ((x - 1.5) * (x - 1.5) + y * y)); });
  HelmholtzDirichletSolver solver(g);
  SolveReport rep;
  auto psi = solver.solve(f, nullptr, &rep);
  EXPECT_LT(rep.residual, 1e-10);
  EXPECT_LT(rep.iterations, 60);
  for (int j = 0; j < g->n_theta(); ++j) EXPECT_EQ(psi.at(0, j), 0.0);
}

TEST(Neumann, RecoversManufacturedPotential) {
  ExteriorDomain d;
  d.boundary = BoundaryCurve({{2, 0.05, 0.02}});
  auto g = make_grid(d, 128, 64);
  auto beta = ScalarField::from_function(g, [](double x, double y) { return 1.0 + 0.3 * std::exp(-(x * x + y * y) / 4); });
  auto q_exact = ScalarField::from_function(g, [](double x, double y) { return std::exp(-0.25 * (x * x + y * y)) * (x + 0.5 * y); });
  // f and boundary data from the continuous operator, evaluated with grid derivatives
  auto flux = VectorField(beta * grad(q_exact).x, beta * grad(q_exact).y);
  auto f = div(flux);
  auto nhat = rho_direction(g);
  std::vector<double> gi(g->n_theta()), go(g->n_theta());
  for (int j = 0; j < g->n_theta(); ++j) {
    const auto k0 = g->index(0, j), k1 = g->index(g->n_r() - 1, j);
    gi[j] = flux.x[k0] * nhat.x[k0] + flux.y[k0] * nhat.y[k0];
    go[j] = flux.x[k1] * nhat.x[k1] + flux.y[k1] * nhat.y[k1];
  }
  WeightedNeumannSolver solver(g, beta);
  SolveReport rep;
  auto q = solver.solve(f, gi, go, &rep);
  // compare modulo constants
  double mean_err = 0.0, area = 0.0;
  for (std::size_t k = 0; k < g->size(); ++k) {
    mean_err += g->jacobian()[k] * (q[k] - q_exact[k]);
    area += g->jacobian()[k];
  }
  auto diff = q - q_exact;
  for (auto& v : diff.data()) v -= mean_err / area;
  EXPECT_LT(max_abs(diff), 1e-5);
  EXPECT_LT(std::abs(rep.compat_defect), 1e-5);
}

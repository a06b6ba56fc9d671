#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "machlab/data.hpp"
#include "machlab/run.hpp"

using namespace machlab;

namespace {

GridPtr circle_grid(int nr, int nt) { return make_grid(ExteriorDomain{}, nr, nt); }

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::config;
}

double max_diff(const EulerFields& a, const EulerFields& b) {
  return std::max({max_abs(a.p - b.p), max_abs(a.v.x - b.v.x), max_abs(a.v.y - b.v.y), max_abs(a.S - b.S)});
}

EulerFields equilibrium(const GridPtr& g, double p0) {
  EulerFields u(g);
  u.p = ScalarField::from_function(g, [&](double, double) { return p0; });
  u.S = ScalarField::from_function(g, [](double x, double y) {
    const double r = std::hypot(x, y);
    return 0.3 * std::exp(-(r - 3) * (r - 3)) * (1 + 0.2 * x / r);
  });
  return u;
}

RunOptions quick_run(double t_end, double every) {
  RunOptions o;
  o.t_end = t_end;
  o.output_every = every;
  o.compute_norm = false;
  return o;
}

}  // namespace

TEST(EOS, ValuesAtOriginAndPositivity) {
  const EOS e;
  EXPECT_DOUBLE_EQ(e.a(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(e.r(0, 0), 1.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_GT(e.a(u(rng), u(rng)), 0.0);
    EXPECT_GT(e.r(u(rng), u(rng)), 0.0);
  }
  const EOS ig = EOS::ideal_gas(1.4);
  EXPECT_DOUBLE_EQ(ig.a(0.3, 0.2), 1.0 / 1.4);
  EXPECT_NEAR(ig.r(0.3, 0.2), std::exp(-0.3 / 1.4 + (1 / 1.4 - 1) * 0.2), 1e-15);
}

TEST(EOS, LowMachLimitIsFirstOrder) {
  const EOS e;
  const double S = 0.4, p = 1.3;
  const double d2 = std::abs(e.r(S, 1e-2 * p) - e.r(S, 0)), d3 = std::abs(e.r(S, 1e-3 * p) - e.r(S, 0));
  EXPECT_LE(d2, 2.0 * 1e-2);
  EXPECT_LE(d3, 2.0 * 1e-3);
  EXPECT_NEAR(d2 / d3, 10.0, 0.1);
}

TEST(EOS, ConfigSelectsKind) {
  EXPECT_EQ(EOS::from_config(Config::parse("eos.kind = ideal_gas\ngamma = 1.67")).kind, "ideal_gas");
  EXPECT_EQ(kind_of([] { EOS::from_config(Config::parse("eos.kind = stiffened")); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { EOS::ideal_gas(1.0); }), ErrorKind::parameter);
}

TEST(Compressible, RejectsBadMachNumber) {
  auto g = circle_grid(32, 16);
  EXPECT_EQ(kind_of([&] { CompressibleSolver(g, EOS{}, 0.0); }), ErrorKind::parameter);
  EXPECT_EQ(kind_of([&] { CompressibleSolver(g, EOS{}, 1.5); }), ErrorKind::parameter);
}

TEST(Compressible, EquilibriumHasZeroTimeDerivatives) {
  auto g = circle_grid(64, 32);
  const CompressibleSolver s(g, EOS{}, 0.1);
  const auto td = s.time_derivative_stack_model(equilibrium(g, 0.0), 2);
  for (std::size_t i = 1; i < td.size(); ++i) EXPECT_LE(max_diff(td[i], EulerFields(g)), 1e-13);
}

TEST(Compressible, EquilibriumIsUnchangedByStepping) {
  auto g = circle_grid(64, 32);
  const CompressibleSolver s(g, EOS{}, 0.1);
  EulerState st(equilibrium(g, 0.0), 0.1, 0.0);
  const EulerState start = st;
  for (int n = 0; n < 20; ++n) s.step(st, s.stable_dt(st));
  EXPECT_LE(max_diff(st, start), 1e-13);
}

TEST(Compressible, WallProjectionRemovesNormalVelocity) {
  auto g = circle_grid(32, 16);
  const CompressibleSolver s(g, EOS{}, 0.1);
  EulerFields u(g);
  u.v = VectorField::from_function(g, [](double x, double y) {
    const double r = std::hypot(x, y);
    return Vec2{x / r, y / r};
  });
  s.enforce_bc(u);
  EXPECT_LE(s.max_wall_normal_velocity(u), 1e-15);
}

TEST(Compressible, SecondDerivativeMatchesDirectionalDifference) {
  auto g = circle_grid(64, 32);
  DataSpec d;
  const CompressibleSolver s(g, EOS{}, 0.5);
  EulerState u = well_prepared_data(g, EOS{}, d, 0.5);
  u.p = ScalarField::from_function(g, [](double x, double y) { return 0.1 * std::exp(-((x - 3) * (x - 3) + y * y)); });
  const EulerFields w = s.rhs(u);
  const EulerFields model = s.rhs_derivative(u, w);
  double prev = 0.0;
  for (double h : {1e-3, 5e-4}) {
    EulerFields up = u, um = u;
    up.axpy(h, w);
    um.axpy(-h, w);
    EulerFields fd = s.rhs(up);
    fd.axpy(-1.0, s.rhs(um));
    EulerFields scaled(g);
    scaled.axpy(1.0 / (2 * h), fd);
    const double err = max_diff(scaled, model) / std::max(1.0, max_abs(model.p));
    EXPECT_LE(err, 1e-4);
    if (prev > 0.0) EXPECT_LE(err, prev / 3.0);  // O(h²)
    prev = err;
  }
}

TEST(Compressible, CflViolationBlowsUp) {
  auto g = circle_grid(64, 32);
  CompressibleOptions o;
  o.cfl = 1.6;  // 4× the default
  DataSpec d;
  const CompressibleSolver s(g, EOS{}, 0.1, o);
  EulerState st = acoustic_data(g, d, 0.1);
  const ErrorKind k = kind_of([&] {
    for (int n = 0; n < 200; ++n) s.step(st, s.stable_dt(st));
  });
  EXPECT_EQ(k, ErrorKind::blowup);
}

TEST(Compressible, AcousticFrequencyScalesWithInverseMach) {
  auto g = circle_grid(128, 64);
  DataSpec d;
  d.amplitude = 1e-3;
  const CompressibleSolver a(g, EOS{}, 0.1), b(g, EOS{}, 0.05);
  const double fa = acoustic_frequency(a, acoustic_data(g, d, 0.1));
  const double fb = acoustic_frequency(b, acoustic_data(g, d, 0.05));
  EXPECT_NEAR(fb / fa, 2.0, 0.2);
}

TEST(Compressible, WellPreparedRunKeepsInvariants) {
  auto g = circle_grid(128, 64);
  const CompressibleSolver s(g, EOS{}, 0.1);
  const auto run = run_compressible(s, well_prepared_data(g, EOS{}, DataSpec{}, 0.1), nullptr, quick_run(0.1, 0.05));
  EXPECT_LE(run.max_vnu, 1e-10);
  EXPECT_LE(run.s_drift_rate, 1e-6);
  EXPECT_EQ(run.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(run.rows.back().t, 0.1);
}

TEST(Compressible, NormHorizonIsEnforced) {
  RunOptions o;
  o.t_end = 0.3;  // horizon is 0.5/(2·1.25) = 0.2
  EXPECT_EQ(kind_of([&] { o.validate(); }), ErrorKind::config);
  EXPECT_NO_THROW(o.validate(false));
}

TEST(Data, RestStateIsExactlyCompatible) {
  auto g = circle_grid(64, 32);
  DataSpec d;
  d.kind = "rest";
  CompatibilityReport rep;
  const auto s = well_prepared_data(g, EOS{}, d, 0.1, &rep);
  EXPECT_EQ(rep.order0, 0.0);
  EXPECT_EQ(rep.order1, 0.0);
  EXPECT_EQ(max_abs(s.p), 0.0);
}

TEST(Data, SwirlHasZeroPressureAndVanishingResiduals) {
  auto g = circle_grid(64, 32);
  CompatibilityReport rep;
  const auto s = well_prepared_data(g, EOS{}, DataSpec{}, 0.1, &rep);
  EXPECT_EQ(max_abs(s.p), 0.0);
  EXPECT_LE(rep.order0, 1e-12);
  EXPECT_LE(rep.order1, 1e-12);
}

TEST(Data, InvalidSpecsAreRejected) {
  auto g = circle_grid(32, 16);
  DataSpec d;
  d.kind = "acoustic_packet";
  EXPECT_EQ(kind_of([&] { well_prepared_data(g, EOS{}, d, 0.1); }), ErrorKind::data);
  EXPECT_EQ(kind_of([] { DataSpec::from_config(Config::parse("data.kind = vortex_sheet")); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { DataSpec::from_config(Config::parse("data.center = 1.5\ndata.width = 1.0")); }),
            ErrorKind::config);
  // potential flow is tangent to the wall but its centripetal acceleration is not
  d.kind = "potential_flow";
  EXPECT_EQ(kind_of([&] { well_prepared_data(g, EOS{}, d, 0.1); }), ErrorKind::data);
}

TEST(Incompressible, RestStaysAtRest) {
  auto g = circle_grid(64, 32);
  const IncompressibleSolver s(g, EOS{});
  EulerFields u = equilibrium(g, 0.0);
  IncState st = s.project_initial(u.v, u.S);
  for (int n = 0; n < 3; ++n) s.step(st, 0.05);
  EXPECT_LE(std::max(max_abs(st.v.x), max_abs(st.v.y)), 1e-12);
  EXPECT_LE(max_value(st.pi) - min_value(st.pi), 1e-12);
}

TEST(Incompressible, ProjectionFixesSolenoidalFieldsAndIsIdempotent) {
  auto g = circle_grid(128, 64);
  const IncompressibleSolver s(g, EOS{});
  const ScalarField S0(g);
  // ∇^⊥ of a bump supported off the wall: divergence-free and tangent.
  const auto sol = perp_grad(ScalarField::from_function(g, [](double x, double y) {
    return bump((std::hypot(x, y) - 3.0) / 1.5);
  }));
  const auto w = s.project(sol, S0).w;
  EXPECT_LE(max_abs(w.x - sol.x) + max_abs(w.y - sol.y), 1e-6);
  const auto ww = s.project(w, S0).w;
  EXPECT_LE(max_abs(ww.x - w.x) + max_abs(ww.y - w.y), 1e-7);
  // a gradient whose potential is negligible at both rings is removed
  const auto gr = grad(ScalarField::from_function(g, [](double x, double y) {
    return std::exp(-((x - 3.2) * (x - 3.2) + y * y));
  }));
  const auto z = s.project(gr, S0).w;
  EXPECT_LE(l2_norm(z), 1e-6 * l2_norm(gr));
}

TEST(Incompressible, PotentialFlowStaysSteady) {
  auto g = circle_grid(128, 64);
  const IncompressibleSolver s(g, EOS{});
  DataSpec d;
  d.kind = "potential_flow";
  d.amplitude = 1.0;
  const EulerFields u = raw_data(g, d);
  IncState st = s.project_initial(u.v, u.S);
  const VectorField v0 = st.v;
  const double e0 = s.kinetic_energy(st);
  s.advance(st, 0.2);
  EXPECT_LE(l2_norm(VectorField(st.v.x - v0.x, st.v.y - v0.y)) / l2_norm(v0), 1e-3);
  EXPECT_LE(std::abs(s.kinetic_energy(st) - e0) / e0 / 0.2, 1e-4);
  EXPECT_LE(s.max_wall_normal_velocity(st), 1e-12);
}

TEST(Incompressible, VariableDensityRunConservesEntropyRange) {
  auto g = circle_grid(96, 48);
  const IncompressibleSolver s(g, EOS{});
  const EulerFields u = raw_data(g, DataSpec{});
  IncState st = s.project_initial(u.v, u.S);
  const double lo = min_value(st.S), hi = max_value(st.S);
  s.advance(st, 0.1);
  EXPECT_GE(min_value(st.S), lo - 1e-6);
  EXPECT_LE(max_value(st.S), hi + 1e-6);
  EXPECT_GT(max_abs(st.r0 - ScalarField::from_function(g, [](double, double) { return 1.0; })), 0.01);
}

TEST(LimitDistance, IdenticalStatesAndAlignment) {
  auto g = circle_grid(64, 32);
  const EulerFields u = raw_data(g, DataSpec{});
  std::vector<EulerState> comp;
  std::vector<IncState> inc;
  for (double t : {0.0, 0.1, 0.2}) {
    EulerState c(u, 0.1, t);
    c.p = ScalarField(g);
    comp.push_back(c);
    IncState i;
    i.v = u.v;
    i.S = u.S;
    i.t = t;
    inc.push_back(i);
  }
  EXPECT_EQ(limit_distance(comp, inc, 0.1, 4), 0.0);
  inc.pop_back();
  EXPECT_EQ(kind_of([&] { limit_distance(comp, inc, 0.1, 4); }), ErrorKind::alignment);
  IncState late = inc.back();
  late.t = 0.25;
  inc.push_back(late);
  EXPECT_EQ(kind_of([&] { limit_distance(comp, inc, 0.1, 4); }), ErrorKind::alignment);
}

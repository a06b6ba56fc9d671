#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "machlab/compressible.hpp"
#include "machlab/elliptic.hpp"
#include "machlab/errors.hpp"
#include "machlab/field.hpp"
#include "machlab/fieldops.hpp"
#include "machlab/norms.hpp"

namespace machlab {

/// Stratified incompressible Euler state: r₀(∂ₜv + v·∇v) + ∇π = 0, div v = 0,
/// ∂ₜS + v·∇S = 0 with r₀ = r(S, 0).
struct IncState {
  VectorField v;
  ScalarField S;
  ScalarField pi;
  ScalarField r0;
  double t = 0.0;
};

struct IncompressibleOptions {
  double cfl = 0.4;
  bool theta_filter = true;
  double compat_tol = 1e-4;  // allowed Neumann multiplier relative to max|f|
  SolverOptions solver{};

  static IncompressibleOptions from_config(const Config& cfg) {
    IncompressibleOptions o;
    o.cfl = cfg.get_double("solver.cfl", o.cfl);
    o.theta_filter = cfg.get_bool("solver.theta_filter", o.theta_filter);
    require(o.cfl > 0.0, ErrorKind::config, "cfl must be positive");
    return o;
  }
};

/// Result of one weighted projection w = v − β∇q.
struct Projection {
  VectorField w;
  ScalarField q;
  SolveReport report;
};

/// Limit solver on the compressible grid. The wall is impermeable; the normal
/// flux through the outer ring is held at its initial value and the outer
/// ring itself is frozen.
class IncompressibleSolver {
 public:
  IncompressibleSolver(GridPtr grid, EOS eos, IncompressibleOptions opts = {})
      : grid_(std::move(grid)), eos_(eos), opts_(opts), nhat_(rho_direction(grid_)), nu_(wall_normal(grid_)) {
    ScalarField one(grid_);
    for (auto& x : one.data()) x = 1.0;
    neumann_ = std::make_unique<WeightedNeumannSolver>(grid_, one, opts_.solver);
  }

  const GridPtr& grid() const { return grid_; }
  const EOS& eos() const { return eos_; }
  const IncompressibleOptions& options() const { return opts_; }

  ScalarField density(const ScalarField& S) const {
    return S.map([&](double s) {
      const double r = eos_.r(s, 0.0);
      if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorKind::parameter, "EOS range error: r(S, 0) not positive");
      return r;
    });
  }

  /// w = v − β∇q with β = 1/r₀, div w = 0 and w·ν = 0 on the wall; the outer
  /// normal flux of v is kept. Equivalent to div w = 0, curl(r₀w) = curl(r₀v).
  Projection project(const VectorField& v, const ScalarField& S, const ScalarField* guess = nullptr) const {
    const Grid& g = *grid_;
    const ScalarField r0 = density(S);
    ScalarField beta = r0.map([](double r) { return 1.0 / r; });
    neumann_->set_beta(beta);
    const ScalarField f = div(v);
    std::vector<double> g_in(g.n_theta()), g_out(g.n_theta(), 0.0);
    for (int j = 0; j < g.n_theta(); ++j) {
      const std::size_t k = g.index(0, j);
      g_in[j] = v.x[k] * nhat_.x[k] + v.y[k] * nhat_.y[k];
    }
    Projection out;
    out.q = neumann_->solve(f, g_in, g_out, &out.report, guess);
    check_defect(out.report, f, "projection");
    const VectorField gq = grad(out.q);
    out.w = v;
    for (std::size_t k = 0; k < g.size(); ++k) {
      out.w.x[k] -= beta[k] * gq.x[k];
      out.w.y[k] -= beta[k] * gq.y[k];
    }
    project_wall(out.w);
    return out;
  }

  /// Initial state from (v₀, S₀): v = w₀, π from the pressure equation.
  IncState project_initial(const VectorField& v0, const ScalarField& S0, SolveReport* report = nullptr) const {
    Projection pr = project(v0, S0);
    if (report) *report = pr.report;
    IncState s;
    s.v = std::move(pr.w);
    s.S = S0;
    s.r0 = density(S0);
    s.pi = rates(s.v, s.S).pi;
    s.t = 0.0;
    return s;
  }

  struct Rates {
    VectorField dv;
    ScalarField dS;
    ScalarField pi;
  };

  /// ∂ₜv = F − β∇π with F = −v·∇v and ∇·(β∇π) = ∇·F, β∂π/∂n̂ = F·n̂ on both rings.
  Rates rates(const VectorField& v, const ScalarField& S, const ScalarField* pi_guess = nullptr) const {
    const Grid& g = *grid_;
    const ScalarField beta = density(S).map([](double r) { return 1.0 / r; });
    neumann_->set_beta(beta);
    const VectorField gvx = grad(v.x), gvy = grad(v.y), gs = grad(S);
    VectorField F(grid_);
    ScalarField dS(grid_);
    for (std::size_t k = 0; k < g.size(); ++k) {
      F.x[k] = -(v.x[k] * gvx.x[k] + v.y[k] * gvx.y[k]);
      F.y[k] = -(v.x[k] * gvy.x[k] + v.y[k] * gvy.y[k]);
      dS[k] = -(v.x[k] * gs.x[k] + v.y[k] * gs.y[k]);
    }
    const ScalarField f = div(F);
    const int io = g.n_r() - 1;
    std::vector<double> g_in(g.n_theta()), g_out(g.n_theta());
    for (int j = 0; j < g.n_theta(); ++j) {
      const std::size_t k0 = g.index(0, j), k1 = g.index(io, j);
      g_in[j] = F.x[k0] * nhat_.x[k0] + F.y[k0] * nhat_.y[k0];
      g_out[j] = F.x[k1] * nhat_.x[k1] + F.y[k1] * nhat_.y[k1];
    }
    SolveReport rep;
    Rates out;
    out.pi = neumann_->solve(f, g_in, g_out, &rep, pi_guess);
    check_defect(rep, f, "pressure");
    const VectorField gp = grad(out.pi);
    out.dv = F;
    for (std::size_t k = 0; k < g.size(); ++k) {
      out.dv.x[k] -= beta[k] * gp.x[k];
      out.dv.y[k] -= beta[k] * gp.y[k];
    }
    project_wall(out.dv);
    for (int j = 0; j < g.n_theta(); ++j) {
      out.dv.x.at(io, j) = 0.0;
      out.dv.y.at(io, j) = 0.0;
      dS.at(io, j) = 0.0;
    }
    out.dS = std::move(dS);
    return out;
  }

  /// Advective step cfl·h_min/max|v|, capped at 1 for a fluid at rest.
  double stable_dt(const IncState& s) const {
    const double vmax = std::max(max_abs(s.v.x), max_abs(s.v.y));
    return vmax > 0.0 ? std::min(1.0, opts_.cfl * grid_->h_min() / vmax) : 1.0;
  }

  /// RK4 step followed by the θ filter and a re-projection of v.
  void step(IncState& s, double dt) const {
    auto stage = [&](const VectorField& v, const ScalarField& S) { return rates(v, S, &s.pi); };
    const Rates k1 = stage(s.v, s.S);
    VectorField v = s.v;
    ScalarField S = s.S;
    v.axpy(0.5 * dt, k1.dv);
    S.axpy(0.5 * dt, k1.dS);
    const Rates k2 = stage(v, S);
    v = s.v;
    S = s.S;
    v.axpy(0.5 * dt, k2.dv);
    S.axpy(0.5 * dt, k2.dS);
    const Rates k3 = stage(v, S);
    v = s.v;
    S = s.S;
    v.axpy(dt, k3.dv);
    S.axpy(dt, k3.dS);
    const Rates k4 = stage(v, S);
    s.v.axpy(dt / 6.0, k1.dv).axpy(dt / 3.0, k2.dv).axpy(dt / 3.0, k3.dv).axpy(dt / 6.0, k4.dv);
    s.S.axpy(dt / 6.0, k1.dS).axpy(dt / 3.0, k2.dS).axpy(dt / 3.0, k3.dS).axpy(dt / 6.0, k4.dS);
    if (opts_.theta_filter) {
      filter_theta(s.v.x);
      filter_theta(s.v.y);
      filter_theta(s.S);
    }
    s.v = project(s.v, s.S).w;
    s.r0 = density(s.S);
    s.pi = k4.pi;
    s.t += dt;
    if (!(s.v.x.all_finite() && s.v.y.all_finite() && s.S.all_finite())) {
      std::ostringstream os;
      os << "incompressible state diverged at t = " << s.t;
      fail(ErrorKind::blowup, os.str());
    }
  }

  /// Steps to `t_end` without overshooting it.
  void advance(IncState& s, double t_end) const {
    while (s.t < t_end - 1e-12 * std::max(1.0, t_end)) step(s, std::min(stable_dt(s), t_end - s.t));
  }

  double max_wall_normal_velocity(const IncState& s) const {
    double m = 0.0;
    for (double x : boundary_normal_component(s.v)) m = std::max(m, std::abs(x));
    return m;
  }

  /// ∫ r₀|v|²/2 over the non-sponge region.
  double kinetic_energy(const IncState& s) const {
    ScalarField e(grid_);
    for (std::size_t k = 0; k < e.size(); ++k)
      e[k] = 0.5 * s.r0[k] * (s.v.x[k] * s.v.x[k] + s.v.y[k] * s.v.y[k]);
    return integrate(e);
  }

 private:
  void check_defect(const SolveReport& rep, const ScalarField& f, const char* what) const {
    const double scale = std::max(1.0, max_abs(f));
    if (std::abs(rep.compat_defect) > opts_.compat_tol * scale) {
      std::ostringstream os;
      os << what << " Neumann problem: solvability defect " << rep.compat_defect;
      fail(ErrorKind::solver, os.str());
    }
  }

  void project_wall(VectorField& v) const {
    const Grid& g = *grid_;
    for (int j = 0; j < g.n_theta(); ++j) {
      const std::size_t k = g.index(0, j);
      const double vn = v.x[k] * nu_.x[k] + v.y[k] * nu_.y[k];
      v.x[k] -= vn * nu_.x[k];
      v.y[k] -= vn * nu_.y[k];
    }
  }

  void filter_theta(ScalarField& f) const {
    const Grid& g = *grid_;
    const ThetaFFT& fft = g.fft();
    const int nc = fft.modes();
    const double mmax = static_cast<double>(g.n_theta() / 2);
    std::vector<ThetaFFT::cplx> spec(static_cast<std::size_t>(g.n_r()) * nc);
    fft.forward(f.values(), spec);
    for (int i = 0; i < g.n_r(); ++i)
      for (int m = 0; m < nc; ++m) spec[static_cast<std::size_t>(i) * nc + m] *= std::exp(-36.0 * std::pow(m / mmax, 36));
    fft.backward(spec, f.values());
  }

  GridPtr grid_;
  EOS eos_;
  IncompressibleOptions opts_;
  VectorField nhat_;
  VectorField nu_;
  std::unique_ptr<WeightedNeumannSolver> neumann_;
};

/// (∫ ‖v^ε − v‖²_X + ‖p^ε‖²_X + ‖S^ε − S‖²_X dt)^{1/2}, trapezoid in t over
/// matched output times.
inline double limit_distance(const std::vector<EulerState>& comp, const std::vector<IncState>& inc, double delta,
                             int n_max) {
  require(comp.size() == inc.size(), ErrorKind::alignment,
          "limit_distance: " + std::to_string(comp.size()) + " compressible vs " + std::to_string(inc.size()) +
              " incompressible output times");
  require(!comp.empty(), ErrorKind::alignment, "limit_distance: empty time series");
  std::vector<double> d2(comp.size());
  for (std::size_t n = 0; n < comp.size(); ++n) {
    const double tc = comp[n].t, ti = inc[n].t;
    if (std::abs(tc - ti) > 1e-9 * std::max(1.0, std::abs(tc))) {
      std::ostringstream os;
      os << "limit_distance: output " << n << " at t = " << tc << " vs " << ti;
      fail(ErrorKind::alignment, os.str());
    }
    if (n > 0) require(tc > comp[n - 1].t, ErrorKind::alignment, "limit_distance: times must increase");
    const double dv = norm_X(std::vector<ScalarField>{comp[n].v.x - inc[n].v.x, comp[n].v.y - inc[n].v.y}, delta, n_max).total;
    const double dp = norm_X(std::vector<ScalarField>{comp[n].p}, delta, n_max).total;
    const double ds = norm_X(std::vector<ScalarField>{comp[n].S - inc[n].S}, delta, n_max).total;
    d2[n] = dv * dv + dp * dp + ds * ds;
  }
  if (comp.size() == 1) return std::sqrt(d2[0]);  // a single output time: pointwise distance
  double s = 0.0;
  for (std::size_t n = 1; n < comp.size(); ++n) s += 0.5 * (comp[n].t - comp[n - 1].t) * (d2[n] + d2[n - 1]);
  return std::sqrt(s);
}

}  // namespace machlab

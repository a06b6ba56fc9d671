#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "machlab/config.hpp"
#include "machlab/errors.hpp"
#include "machlab/field.hpp"
#include "machlab/fieldops.hpp"

namespace machlab {

/// a(S, q) = f₁(S)g₁(q), r(S, q) = f₂(S)g₂(q) with q = εp and every factor of
/// the form c·exp(αS) or exp(βq).
struct EOS {
  std::string kind = "exponential";
  double gamma = 1.4;
  double c1 = 1.0, alpha1 = 0.5, beta1 = -1.0;
  double c2 = 1.0, alpha2 = -0.5, beta2 = 1.0;

  static EOS exponential() { return EOS{}; }

  /// Symmetrization of P = ρ^γ e^S with P = e^{εp}: a = 1/γ, r = e^{−S/γ}e^{(1/γ−1)εp}.
  static EOS ideal_gas(double gamma) {
    require(gamma > 1.0, ErrorKind::parameter, "gamma must exceed 1");
    EOS e;
    e.kind = "ideal_gas";
    e.gamma = gamma;
    e.c1 = 1.0 / gamma;
    e.alpha1 = 0.0;
    e.beta1 = 0.0;
    e.c2 = 1.0;
    e.alpha2 = -1.0 / gamma;
    e.beta2 = 1.0 / gamma - 1.0;
    return e;
  }

  static EOS from_config(const Config& cfg) {
    const std::string kind = cfg.get_string("eos.kind", "exponential");
    const double gamma = cfg.get_double("gamma", 1.4);
    if (kind == "exponential") {
      EOS e;
      e.gamma = gamma;
      return e;
    }
    if (kind == "ideal_gas") return ideal_gas(gamma);
    fail(ErrorKind::config, "unknown eos.kind '" + kind + "'");
  }

  double a(double S, double q) const { return c1 * std::exp(alpha1 * S + beta1 * q); }
  double r(double S, double q) const { return c2 * std::exp(alpha2 * S + beta2 * q); }
};

struct EulerFields {
  ScalarField p;
  VectorField v;
  ScalarField S;

  EulerFields() = default;
  explicit EulerFields(const GridPtr& g) : p(g), v(g), S(g) {}
  EulerFields(ScalarField p_, VectorField v_, ScalarField S_) : p(std::move(p_)), v(std::move(v_)), S(std::move(S_)) {}

  EulerFields& axpy(double s, const EulerFields& o) {
    p.axpy(s, o.p);
    v.axpy(s, o.v);
    S.axpy(s, o.S);
    return *this;
  }
  bool all_finite() const { return p.all_finite() && v.all_finite() && S.all_finite(); }
  /// Base components in stack order: u = (p, v₁, v₂), then S separately.
  std::vector<ScalarField> u_components() const { return {p, v.x, v.y}; }
};

struct EulerState : EulerFields {
  double eps = 0.1;
  double t = 0.0;

  EulerState() = default;
  EulerState(EulerFields f, double eps_, double t_) : EulerFields(std::move(f)), eps(eps_), t(t_) {}
};

struct CompressibleOptions {
  double cfl = 0.4;
  double sponge_strength = 5.0;     // σ at the outer ring is sponge_strength / ε
  double radial_dissipation = 0.015;  // α in −(α/(εΔr))·Δ₄ᵀΔ₄ on p
  bool theta_filter = true;          // exp(−36(m/m_max)³⁶) after every step
  double blowup_threshold = 1e8;

  static CompressibleOptions from_config(const Config& cfg) {
    CompressibleOptions o;
    o.cfl = cfg.get_double("solver.cfl", o.cfl);
    o.sponge_strength = cfg.get_double("solver.sponge_strength", o.sponge_strength);
    o.radial_dissipation = cfg.get_double("solver.radial_dissipation", o.radial_dissipation);
    o.theta_filter = cfg.get_bool("solver.theta_filter", o.theta_filter);
    require(o.cfl > 0.0, ErrorKind::config, "cfl must be positive");
    require(o.radial_dissipation >= 0.0, ErrorKind::config, "radial_dissipation must be nonnegative");
    return o;
  }
};

/// Symmetrized Euler system
///   ∂ₜp = −v·∇p − div v/(εa),  ∂ₜv = −v·∇v − ∇p/(εr),  ∂ₜS = −v·∇S
/// with v·ν = 0 on the wall, a quadratic sponge on (p, v) and the outer ring
/// held at rest. The one-sided radial closures of the centered scheme carry
/// growing modes, so p also gets an eighth-derivative radial dissipation
/// built from the truncated undivided fourth difference Δ₄ (−Δ₄ᵀΔ₄ is
/// negative semidefinite up to the ends).
class CompressibleSolver {
 public:
  CompressibleSolver(GridPtr grid, EOS eos, double eps, CompressibleOptions opts = {})
      : grid_(std::move(grid)), eos_(eos), eps_(eps), opts_(opts), nu_(wall_normal(grid_)), sigma_(grid_) {
    require(eps > 0.0 && eps <= 1.0, ErrorKind::parameter, "eps must lie in (0, 1]");
    const Grid& g = *grid_;
    const double rho_s = g.rho()[g.sponge_start_index()];
    const double rho_o = g.rho().back();
    for (int i = g.sponge_start_index(); i < g.n_r(); ++i) {
      const double s = rho_o > rho_s ? (g.rho()[i] - rho_s) / (rho_o - rho_s) : 1.0;
      for (int j = 0; j < g.n_theta(); ++j) sigma_.at(i, j) = opts_.sponge_strength / eps_ * s * s;
    }
    build_dissipation();
  }

  const GridPtr& grid() const { return grid_; }
  const EOS& eos() const { return eos_; }
  double eps() const { return eps_; }
  const CompressibleOptions& options() const { return opts_; }
  const ScalarField& sponge() const { return sigma_; }

  /// Pointwise coefficients (a, r); throws when either is not positive.
  std::pair<ScalarField, ScalarField> assemble_E(const EulerFields& u) const {
    ScalarField a(grid_), r(grid_);
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] = eos_.a(u.S[k], eps_ * u.p[k]);
      r[k] = eos_.r(u.S[k], eps_ * u.p[k]);
      if (!std::isfinite(a[k]) || !std::isfinite(r[k]))
        fail(ErrorKind::blowup, "non-finite EOS coefficients at node " + std::to_string(k));
      if (!(a[k] > 0.0) || !(r[k] > 0.0))
        fail(ErrorKind::parameter, "EOS range error: a or r not positive at node " + std::to_string(k));
    }
    return {std::move(a), std::move(r)};
  }

  EulerFields rhs(const EulerFields& u) const {
    const auto [a, r] = assemble_E(u);
    const VectorField gp = grad(u.p), gvx = grad(u.v.x), gvy = grad(u.v.y), gs = grad(u.S);
    EulerFields out(grid_);
    const double ie = 1.0 / eps_;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double vx = u.v.x[k], vy = u.v.y[k];
      const double divv = gvx.x[k] + gvy.y[k];
      out.p[k] = -(vx * gp.x[k] + vy * gp.y[k]) - ie * divv / a[k] - sigma_[k] * u.p[k];
      out.v.x[k] = -(vx * gvx.x[k] + vy * gvx.y[k]) - ie * gp.x[k] / r[k] - sigma_[k] * vx;
      out.v.y[k] = -(vx * gvy.x[k] + vy * gvy.y[k]) - ie * gp.y[k] / r[k] - sigma_[k] * vy;
      out.S[k] = -(vx * gs.x[k] + vy * gs.y[k]);
    }
    dissipate(u, out);
    close_wall(out, a, r);
    finish_rates(out);
    return out;
  }

  /// ∂ₜ² of the state: the derivative of the right-hand side along w = ∂ₜu.
  EulerFields rhs_derivative(const EulerFields& u, const EulerFields& w) const {
    const auto [a, r] = assemble_E(u);
    const VectorField gp = grad(u.p), gvx = grad(u.v.x), gvy = grad(u.v.y), gs = grad(u.S);
    const VectorField wp = grad(w.p), wvx = grad(w.v.x), wvy = grad(w.v.y), ws = grad(w.S);
    EulerFields out(grid_);
    const double ie = 1.0 / eps_;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double vx = u.v.x[k], vy = u.v.y[k];
      const double dx = w.v.x[k], dy = w.v.y[k];
      const double divv = gvx.x[k] + gvy.y[k];
      const double divw = wvx.x[k] + wvy.y[k];
      // d(1/a) = −(α₁ dS + β₁ ε dp)/a, likewise for r
      const double la = eos_.alpha1 * w.S[k] + eos_.beta1 * eps_ * w.p[k];
      const double lr = eos_.alpha2 * w.S[k] + eos_.beta2 * eps_ * w.p[k];
      out.p[k] = -(dx * gp.x[k] + dy * gp.y[k]) - (vx * wp.x[k] + vy * wp.y[k]) - ie * divw / a[k] +
                 ie * divv * la / a[k] - sigma_[k] * w.p[k];
      out.v.x[k] = -(dx * gvx.x[k] + dy * gvx.y[k]) - (vx * wvx.x[k] + vy * wvx.y[k]) - ie * wp.x[k] / r[k] +
                   ie * gp.x[k] * lr / r[k] - sigma_[k] * dx;
      out.v.y[k] = -(dx * gvy.x[k] + dy * gvy.y[k]) - (vx * wvy.x[k] + vy * wvy.y[k]) - ie * wp.y[k] / r[k] +
                   ie * gp.y[k] * lr / r[k] - sigma_[k] * dy;
      out.S[k] = -(dx * gs.x[k] + dy * gs.y[k]) - (vx * ws.x[k] + vy * ws.y[k]);
    }
    dissipate(w, out);
    close_wall_derivative(u, w, out);
    finish_rates(out);
    return out;
  }

  /// Model time derivatives ∂ₜⁱ(p, v, S) for i ≤ i_cap ≤ 2.
  std::vector<EulerFields> time_derivative_stack_model(const EulerFields& u, int i_cap) const {
    require(i_cap >= 0 && i_cap <= 2, ErrorKind::parameter, "model time derivatives are available up to order 2");
    std::vector<EulerFields> out{u};
    if (i_cap >= 1) out.push_back(rhs(u));
    if (i_cap >= 2) out.push_back(rhs_derivative(u, out[1]));
    return out;
  }

  /// Removes the wall-normal velocity on the inner ring.
  void enforce_bc(EulerFields& u) const { project_wall(u.v); }

  double max_wall_normal_velocity(const EulerFields& u) const {
    double m = 0.0;
    for (double x : boundary_normal_component(u.v)) m = std::max(m, std::abs(x));
    return m;
  }

  /// Acoustic CFL step cfl·h_min/(1/ε + max|v|).
  double stable_dt(const EulerFields& u) const {
    const double vmax = std::max(max_abs(u.v.x), max_abs(u.v.y));
    return opts_.cfl * grid_->h_min() / (1.0 / eps_ + std::sqrt(2.0) * vmax);
  }

  /// One classical RK4 step; throws a blow-up error on non-finite or runaway states.
  void step(EulerState& s, double dt) const {
    EulerFields k1 = rhs(s);
    EulerFields y = s;
    y.axpy(0.5 * dt, k1);
    EulerFields k2 = rhs(y);
    y = s;
    y.axpy(0.5 * dt, k2);
    EulerFields k3 = rhs(y);
    y = s;
    y.axpy(dt, k3);
    EulerFields k4 = rhs(y);
    s.axpy(dt / 6.0, k1).axpy(dt / 3.0, k2).axpy(dt / 3.0, k3).axpy(dt / 6.0, k4);
    if (opts_.theta_filter) filter_theta(s);
    enforce_bc(s);
    s.t += dt;
    check_state(s);
  }

  void check_state(const EulerState& s) const {
    const double mp = max_abs(s.p), mv = std::max(max_abs(s.v.x), max_abs(s.v.y)), ms = max_abs(s.S);
    const bool ok = s.all_finite() && mp <= opts_.blowup_threshold && mv <= opts_.blowup_threshold &&
                    ms <= opts_.blowup_threshold;
    if (!ok) {
      std::ostringstream os;
      os.precision(6);
      os << "state diverged at t = " << s.t << " (max|p| = " << mp << ", max|v| = " << mv << ", max|S| = " << ms << ")";
      fail(ErrorKind::blowup, os.str());
    }
  }

  /// Spectral θ filter on every component.
  void filter_theta(EulerFields& u) const {
    const Grid& g = *grid_;
    const ThetaFFT& fft = g.fft();
    const int nc = fft.modes();
    const double mmax = static_cast<double>(g.n_theta() / 2);
    std::vector<double> gain(nc);
    for (int m = 0; m < nc; ++m) gain[m] = std::exp(-36.0 * std::pow(m / mmax, 36));
    std::vector<ThetaFFT::cplx> spec(static_cast<std::size_t>(g.n_r()) * nc);
    for (ScalarField* f : {&u.p, &u.v.x, &u.v.y, &u.S}) {
      fft.forward(f->values(), spec);
      for (int i = 0; i < g.n_r(); ++i)
        for (int m = 0; m < nc; ++m) spec[static_cast<std::size_t>(i) * nc + m] *= gain[m];
      fft.backward(spec, f->values());
    }
  }

 private:
  void build_dissipation() {
    const Grid& g = *grid_;
    const int n = g.n_r();
    constexpr int p = 4;
    constexpr double q[p + 1] = {1.0, -4.0, 6.0, -4.0, 1.0};
    diss_.assign(static_cast<std::size_t>(n) * (2 * p + 1), 0.0);
    for (int m = 0; m + p < n; ++m)
      for (int a = 0; a <= p; ++a)
        for (int b = 0; b <= p; ++b) diss_[static_cast<std::size_t>(m + a) * (2 * p + 1) + (b - a + p)] += q[a] * q[b];
    diss_scale_ = ScalarField(grid_);
    for (std::size_t k = 0; k < diss_scale_.size(); ++k)
      diss_scale_[k] = opts_.radial_dissipation / eps_ * std::sqrt(g.g_rr()[k]) / g.drho();
  }

  void dissipate_field(const ScalarField& f, ScalarField& out) const {
    const Grid& g = *grid_;
    const int n = g.n_r(), nt = g.n_theta();
    for (int i = 0; i < n; ++i) {
      for (int o = -4; o <= 4; ++o) {
        const int ii = i + o;
        if (ii < 0 || ii >= n) continue;
        const double w = diss_[static_cast<std::size_t>(i) * 9 + (o + 4)];
        if (w == 0.0) continue;
        for (int j = 0; j < nt; ++j) out.at(i, j) -= diss_scale_.at(i, j) * w * f.at(ii, j);
      }
    }
  }

  void dissipate(const EulerFields& u, EulerFields& out) const {
    if (opts_.radial_dissipation == 0.0) return;
    dissipate_field(u.p, out.p);
  }

  /// Characteristic wall closure: the outgoing invariant p − Z v_in keeps its
  /// rate while the normal velocity rate is removed, Z = √(r/a).
  void close_wall(EulerFields& out, const ScalarField& a, const ScalarField& r) const {
    const Grid& g = *grid_;
    for (int j = 0; j < g.n_theta(); ++j) {
      const std::size_t k = g.index(0, j);
      const double vn = out.v.x[k] * nu_.x[k] + out.v.y[k] * nu_.y[k];
      out.p[k] += std::sqrt(r[k] / a[k]) * vn;
    }
  }

  /// Derivative of the closure along w: Z(u)·(ν·δv̇) + δZ·(ν·v̇) with v̇ the
  /// unprojected velocity rate of u.
  void close_wall_derivative(const EulerFields& u, const EulerFields& w, EulerFields& out) const {
    const Grid& g = *grid_;
    EulerFields base = raw_rates(u);
    for (int j = 0; j < g.n_theta(); ++j) {
      const std::size_t k = g.index(0, j);
      const double q = eps_ * u.p[k];
      const double a = eos_.a(u.S[k], q), r = eos_.r(u.S[k], q);
      const double z = std::sqrt(r / a);
      const double dlog = 0.5 * ((eos_.alpha2 - eos_.alpha1) * w.S[k] + (eos_.beta2 - eos_.beta1) * eps_ * w.p[k]);
      const double vn = out.v.x[k] * nu_.x[k] + out.v.y[k] * nu_.y[k];
      const double vn0 = base.v.x[k] * nu_.x[k] + base.v.y[k] * nu_.y[k];
      out.p[k] += z * vn + z * dlog * vn0;
    }
  }

  /// Right-hand side before the wall closure and rate projection.
  EulerFields raw_rates(const EulerFields& u) const {
    const auto [a, r] = assemble_E(u);
    const VectorField gp = grad(u.p), gvx = grad(u.v.x), gvy = grad(u.v.y);
    EulerFields out(grid_);
    const double ie = 1.0 / eps_;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double vx = u.v.x[k], vy = u.v.y[k];
      out.v.x[k] = -(vx * gvx.x[k] + vy * gvx.y[k]) - ie * gp.x[k] / r[k] - sigma_[k] * vx;
      out.v.y[k] = -(vx * gvy.x[k] + vy * gvy.y[k]) - ie * gp.y[k] / r[k] - sigma_[k] * vy;
    }
    dissipate(u, out);
    return out;
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

  /// Wall projection of the velocity rate and a frozen outer ring.
  void finish_rates(EulerFields& out) const {
    project_wall(out.v);
    const Grid& g = *grid_;
    const int io = g.n_r() - 1;
    for (int j = 0; j < g.n_theta(); ++j) {
      out.p.at(io, j) = 0.0;
      out.v.x.at(io, j) = 0.0;
      out.v.y.at(io, j) = 0.0;
      out.S.at(io, j) = 0.0;
    }
  }

  GridPtr grid_;
  EOS eos_;
  double eps_;
  CompressibleOptions opts_;
  VectorField nu_;
  ScalarField sigma_;
  std::vector<double> diss_;
  ScalarField diss_scale_;
};

/// Time derivatives of the state for stacks: orders ≤ 2 from the model, orders
/// 3 and 4 from centered fourth-order differences of the model second
/// derivative at levels t ± h, t ± 2h obtained by integrating the solver.
/// Returns {td_u, td_S} with td[i][c] the unscaled ∂ₜⁱ of component c.
inline std::pair<std::vector<std::vector<ScalarField>>, std::vector<std::vector<ScalarField>>> state_time_derivatives(
    const CompressibleSolver& solver, const EulerState& s, int i_max, double level_spacing) {
  std::vector<std::vector<ScalarField>> tu, ts;
  const auto model = solver.time_derivative_stack_model(s, std::min(i_max, 2));
  for (const auto& m : model) {
    tu.push_back(m.u_components());
    ts.push_back({m.S});
  }
  if (i_max <= 2) return {tu, ts};
  const double dt_cfl = solver.stable_dt(s);
  const int sub = std::max(1, static_cast<int>(std::ceil(level_spacing / dt_cfl)));
  const double h = level_spacing;
  std::vector<EulerFields> second(5);
  second[2] = model[2];
  for (int dir : {-1, 1}) {
    EulerState w = s;
    for (int lvl = 1; lvl <= 2; ++lvl) {
      for (int n = 0; n < sub; ++n) solver.step(w, dir * h / sub);
      second[2 + dir * lvl] = solver.time_derivative_stack_model(w, 2)[2];
    }
  }
  const std::vector<double> offs{-2 * h, -h, 0.0, h, 2 * h};
  for (int order = 1; order <= i_max - 2; ++order) {
    const auto w = fd_weights(0.0, offs, order);
    EulerFields acc(solver.grid());
    for (int m = 0; m < 5; ++m) acc.axpy(w[m], second[m]);
    tu.push_back(acc.u_components());
    ts.push_back({acc.S});
  }
  return {tu, ts};
}

}  // namespace machlab

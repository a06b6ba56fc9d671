#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "machlab/compressible.hpp"
#include "machlab/config.hpp"
#include "machlab/errors.hpp"
#include "machlab/field.hpp"
#include "machlab/incompressible.hpp"

namespace machlab {

/// exp(1 − 1/(1 − s²)) on |s| < 1, zero outside; equals 1 at s = 0.
inline double bump(double s) {
  const double s2 = s * s;
  return s2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s2)) : 0.0;
}

/// Initial data families. Supports of swirl and entropy are the annulus
/// |r − center| < width, kept off the wall collar.
struct DataSpec {
  std::string kind = "swirl";  // rest | swirl | acoustic_packet | potential_flow
  double amplitude = 0.5;
  double entropy_amplitude = 0.25;
  double center = 3.0;
  double width = 1.5;
  double compat_tol = 1e-6;

  static DataSpec from_config(const Config& cfg) {
    DataSpec d;
    d.kind = cfg.get_string("data.kind", d.kind);
    d.amplitude = cfg.get_double("data.amplitude", d.amplitude);
    d.entropy_amplitude = cfg.get_double("data.entropy_amplitude", d.entropy_amplitude);
    d.center = cfg.get_double("data.center", d.center);
    d.width = cfg.get_double("data.width", d.width);
    d.compat_tol = cfg.get_double("data.compat_tol", d.compat_tol);
    d.validate();
    return d;
  }

  void validate() const {
    if (kind != "rest" && kind != "swirl" && kind != "acoustic_packet" && kind != "potential_flow")
      fail(ErrorKind::config, "unknown data.kind '" + kind + "'");
    require(width > 0.0 && center - width > 1.0, ErrorKind::config, "data support must stay off the wall");
    require(compat_tol > 0.0, ErrorKind::config, "data.compat_tol must be positive");
  }
};

/// Raw (unprojected) fields of a data family.
inline EulerFields raw_data(const GridPtr& grid, const DataSpec& d) {
  d.validate();
  EulerFields f(grid);
  const double A = d.amplitude, As = d.entropy_amplitude, c = d.center, w = d.width;
  auto entropy = [&](double x, double y) {
    const double r = std::hypot(x, y);
    return As * bump((r - c) / w) * (1.0 + 0.5 * x / r);
  };
  if (d.kind == "rest") {
    f.S = ScalarField::from_function(grid, entropy);
  } else if (d.kind == "swirl") {
    f.v = VectorField::from_function(grid, [&](double x, double y) {
      const double r = std::hypot(x, y);
      const double b = A * bump((r - c) / w);
      return Vec2{-b * y / r, b * x / r};
    });
    f.S = ScalarField::from_function(grid, entropy);
  } else if (d.kind == "acoustic_packet") {
    f.p = ScalarField::from_function(grid, [&](double x, double y) {
      const double dx = x - c;
      return A * std::exp(-(dx * dx + y * y)) * std::cos(8.0 * dx);
    });
  } else {  // potential flow past the disk: ∇((r + 1/r)cos θ)·A
    f.v = VectorField::from_function(grid, [&](double x, double y) {
      const double r2 = x * x + y * y, r4 = r2 * r2;
      return Vec2{A * (1.0 - (x * x - y * y) / r4), -A * 2.0 * x * y / r4};
    });
  }
  return f;
}

struct CompatibilityReport {
  double order0 = 0.0;  // max |v·ν| on the wall
  double order1 = 0.0;  // max |ν·∂ₜv| on the wall from the equations at t = 0
  SolveReport projection;
};

/// ν·v and ν·(−v·∇v − ∇p/(εr)) on the wall.
inline CompatibilityReport compatibility_residuals(const EulerFields& u, const EOS& eos, double eps) {
  const Grid& g = u.p.grid();
  const VectorField nu = wall_normal(u.p.grid_ptr());
  const VectorField gp = grad(u.p), gvx = grad(u.v.x), gvy = grad(u.v.y);
  CompatibilityReport rep;
  for (int j = 0; j < g.n_theta(); ++j) {
    const std::size_t k = g.index(0, j);
    const double vx = u.v.x[k], vy = u.v.y[k];
    const double r = eos.r(u.S[k], eps * u.p[k]);
    const double ax = -(vx * gvx.x[k] + vy * gvx.y[k]) - gp.x[k] / (eps * r);
    const double ay = -(vx * gvy.x[k] + vy * gvy.y[k]) - gp.y[k] / (eps * r);
    rep.order0 = std::max(rep.order0, std::abs(vx * nu.x[k] + vy * nu.y[k]));
    rep.order1 = std::max(rep.order1, std::abs(ax * nu.x[k] + ay * nu.y[k]));
  }
  return rep;
}

/// p₀ = 0, v₀ = weighted projection of the raw velocity, S₀ raw; checks the
/// compatibility conditions of orders 0 and 1.
inline EulerState well_prepared_data(const GridPtr& grid, const EOS& eos, const DataSpec& d, double eps,
                                     CompatibilityReport* report = nullptr) {
  require(eps > 0.0 && eps <= 1.0, ErrorKind::parameter, "eps must lie in (0, 1]");
  if (d.kind == "acoustic_packet") fail(ErrorKind::data, "acoustic_packet data has p0 != 0 and is not well prepared");
  EulerFields f = raw_data(grid, d);
  SolveReport proj;
  if (d.kind != "rest") {
    const IncompressibleSolver inc(grid, eos);
    Projection pr = inc.project(f.v, f.S);
    f.v = std::move(pr.w);
    proj = pr.report;
  }
  CompatibilityReport rep = compatibility_residuals(f, eos, eps);
  rep.projection = proj;
  if (report) *report = rep;
  if (rep.order0 > d.compat_tol || rep.order1 > d.compat_tol) {
    std::ostringstream os;
    os << "compatibility residuals exceed " << d.compat_tol << ": order 0 = " << rep.order0
       << ", order 1 = " << rep.order1;
    fail(ErrorKind::data, os.str());
  }
  return EulerState(std::move(f), eps, 0.0);
}

/// Acoustic packet state (not well prepared; used for the frequency probe).
inline EulerState acoustic_data(const GridPtr& grid, const DataSpec& d, double eps) {
  DataSpec a = d;
  a.kind = "acoustic_packet";
  return EulerState(raw_data(grid, a), eps, 0.0);
}

}  // namespace machlab

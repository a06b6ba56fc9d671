#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "machlab/elliptic.hpp"
#include "machlab/errors.hpp"
#include "machlab/field.hpp"
#include "machlab/fieldops.hpp"
#include "machlab/frame.hpp"
#include "machlab/grid.hpp"

namespace machlab {

struct SignedDistanceField {
  ScalarField d;
  VectorField gradient;
};

struct DefiningFunction {
  ScalarField psi;
  double moll_param = 0.0;
  double grad_lower_bound = 0.0;
};

/// Nearest boundary parameter for a point, by Newton's method on
/// (P(t) − x)·P'(t) = 0 started from the best of `coarse` samples.
class BoundaryProjector {
 public:
  explicit BoundaryProjector(const BoundaryCurve& curve, int coarse = 256) : curve_(curve) {
    samples_.resize(coarse);
    for (int s = 0; s < coarse; ++s) samples_[s] = curve_.point(kTwoPi * s / coarse);
  }

  /// Returns the parameter of the closest boundary point.
  double project(Vec2 x) const {
    const int n = static_cast<int>(samples_.size());
    int best = 0;
    double bd = std::numeric_limits<double>::max();
    for (int s = 0; s < n; ++s) {
      const double dx = samples_[s].x - x.x, dy = samples_[s].y - x.y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < bd) {
        bd = d2;
        best = s;
      }
    }
    const double t0 = kTwoPi * best / n;
    double t = t0;
    if (newton(x, t) && std::abs(t - t0) <= kTwoPi / n) return t;
    return dense_search(x);
  }

  /// Dense sampling followed by golden-section refinement.
  double dense_search(Vec2 x, int samples = 8192) const {
    int best = 0;
    double bd = std::numeric_limits<double>::max();
    for (int s = 0; s < samples; ++s) {
      const double d2 = dist2(x, kTwoPi * s / samples);
      if (d2 < bd) {
        bd = d2;
        best = s;
      }
    }
    const double h = kTwoPi / samples;
    double a = kTwoPi * best / samples - h, b = a + 2 * h;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 100 && b - a > 1e-15; ++it) {
      const double c = b - gr * (b - a), d = a + gr * (b - a);
      if (dist2(x, c) < dist2(x, d)) b = d;
      else a = c;
    }
    return 0.5 * (a + b);
  }

  double dist2(Vec2 x, double t) const {
    const Vec2 p = curve_.point(t);
    return (p.x - x.x) * (p.x - x.x) + (p.y - x.y) * (p.y - x.y);
  }

 private:
  bool newton(Vec2 x, double& t) const {
    for (int it = 0; it < 30; ++it) {
      const Vec2 p = curve_.point(t), p1 = curve_.tangent(t), p2 = curve_.second(t);
      const double dx = p.x - x.x, dy = p.y - x.y;
      const double g = dx * p1.x + dy * p1.y;
      const double gp = p1.x * p1.x + p1.y * p1.y + dx * p2.x + dy * p2.y;
      if (gp <= 0.0) return false;
      const double step = g / gp;
      t -= step;
      if (std::abs(step) < 1e-15) return true;
    }
    return false;
  }

  const BoundaryCurve& curve_;
  std::vector<Vec2> samples_;
};

/// Throws when the boundary has more structure than the θ-grid resolves.
inline void check_resolvable(const Grid& g) {
  const int k = g.domain().boundary.max_mode();
  require(k <= g.n_theta() / 8, ErrorKind::geometry,
          "boundary mode " + std::to_string(k) + " is not resolved by n_theta = " + std::to_string(g.n_theta()) +
              " (need n_theta >= 8 * max mode)");
}

inline SignedDistanceField signed_distance(const GridPtr& grid) {
  const Grid& g = *grid;
  check_resolvable(g);
  SignedDistanceField out{ScalarField(grid), VectorField(grid)};
  if (g.circular()) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double r = g.r()[k];
      out.d[k] = r - 1.0;
      out.gradient.x[k] = g.x()[k] / r;
      out.gradient.y[k] = g.y()[k] / r;
    }
    for (int j = 0; j < g.n_theta(); ++j) out.d.at(0, j) = 0.0;
    return out;
  }
  const BoundaryCurve& c = g.domain().boundary;
  BoundaryProjector proj(c);
  for (int i = 0; i < g.n_r(); ++i) {
    for (int j = 0; j < g.n_theta(); ++j) {
      const std::size_t k = g.index(i, j);
      if (i == 0) {
        const Vec2 n = c.outward_normal(g.theta()[j]);
        out.d[k] = 0.0;
        out.gradient.x[k] = n.x;
        out.gradient.y[k] = n.y;
        continue;
      }
      const Vec2 x{g.x()[k], g.y()[k]};
      const double t = proj.project(x);
      const Vec2 p = c.point(t);
      const double dx = x.x - p.x, dy = x.y - p.y;
      const double d = std::hypot(dx, dy);
      out.d[k] = d;
      if (d > 1e-13) {
        out.gradient.x[k] = dx / d;
        out.gradient.y[k] = dy / d;
      } else {
        const Vec2 n = c.outward_normal(t);
        out.gradient.x[k] = n.x;
        out.gradient.y[k] = n.y;
      }
    }
  }
  return out;
}

/// Quintic ramp: 1 at s ≤ 0, 0 at s ≥ 1, C² at both ends.
inline double quintic_ramp(double s) {
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

inline std::vector<char> collar_mask(const SignedDistanceField& sdf, double width) {
  std::vector<char> m(sdf.d.size());
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = sdf.d[k] <= width + 1e-12 ? 1 : 0;
  return m;
}

/// ν = −∇d on the collar, ramped to zero over the next collar width.
inline VectorField extend_normal(const SignedDistanceField& sdf, const ExteriorDomain& domain) {
  const GridPtr& grid = sdf.d.grid_ptr();
  const double w = domain.collar_width;
  const auto mask = collar_mask(sdf, w);
  const VectorField gd = grad(sdf.d);
  double worst = 0.0;
  for (std::size_t k = 0; k < mask.size(); ++k)
    if (mask[k]) worst = std::max(worst, std::abs(std::hypot(gd.x[k], gd.y[k]) - 1.0));
  require(worst <= 0.1, ErrorKind::geometry,
          "|grad d| deviates from 1 by " + std::to_string(worst) + " inside the collar");
  VectorField nu(grid);
  for (std::size_t k = 0; k < mask.size(); ++k) {
    const double s = quintic_ramp((sdf.d[k] - w) / w);
    nu.x[k] = -s * sdf.gradient.x[k];
    nu.y[k] = -s * sdf.gradient.y[k];
  }
  return nu;
}

/// Samples on a uniform Cartesian box [x0, x0 + (nx−1)h] × [y0, y0 + (ny−1)h].
struct CartesianField {
  double x0 = 0.0;
  double y0 = 0.0;
  double h = 1.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> v;

  static CartesianField box(double half_width, double spacing) {
    CartesianField f;
    const int n = 2 * static_cast<int>(std::ceil(half_width / spacing)) + 1;
    f.nx = f.ny = n;
    f.h = spacing;
    f.x0 = f.y0 = -spacing * (n - 1) / 2;
    f.v.assign(static_cast<std::size_t>(n) * n, 0.0);
    return f;
  }

  template <class F>
  void fill(F&& fn) {
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) at(ix, iy) = fn(x(ix), y(iy));
  }

  double x(int ix) const { return x0 + ix * h; }
  double y(int iy) const { return y0 + iy * h; }
  double& at(int ix, int iy) { return v[static_cast<std::size_t>(iy) * nx + ix]; }
  double at(int ix, int iy) const { return v[static_cast<std::size_t>(iy) * nx + ix]; }

  /// Tensor-product Lagrange interpolation on the 6×6 surrounding nodes.
  double interpolate(double px, double py) const {
    constexpr int w = 6;
    const double fx = (px - x0) / h, fy = (py - y0) / h;
    const int ix0 = std::clamp(static_cast<int>(std::floor(fx)) - w / 2 + 1, 0, nx - w);
    const int iy0 = std::clamp(static_cast<int>(std::floor(fy)) - w / 2 + 1, 0, ny - w);
    double lx[w], ly[w];
    for (int a = 0; a < w; ++a) {
      lx[a] = 1.0;
      ly[a] = 1.0;
      for (int b = 0; b < w; ++b) {
        if (a == b) continue;
        lx[a] *= (fx - (ix0 + b)) / static_cast<double>(a - b);
        ly[a] *= (fy - (iy0 + b)) / static_cast<double>(a - b);
      }
    }
    double s = 0.0;
    for (int b = 0; b < w; ++b) {
      double row = 0.0;
      for (int a = 0; a < w; ++a) row += lx[a] * at(ix0 + a, iy0 + b);
      s += ly[b] * row;
    }
    return s;
  }

  ScalarField to_grid(const GridPtr& grid) const {
    return ScalarField::from_function(grid, [&](double x, double y) { return interpolate(x, y); });
  }
};

/// Convolution with the heat kernel at time `eps_moll` (Gaussian of variance
/// 2·eps_moll per axis), applied separably with the sampled kernel normalized
/// to unit mass. Values outside the box are treated as zero.
inline CartesianField mollify_defining(const CartesianField& d0, double eps_moll) {
  require(eps_moll > 0.0, ErrorKind::parameter, "eps_moll must be positive");
  const double sigma = std::sqrt(2.0 * eps_moll);
  const int half = static_cast<int>(std::ceil(10.0 * sigma / d0.h));
  std::vector<double> ker(2 * half + 1);
  double mass = 0.0;
  for (int k = -half; k <= half; ++k) {
    const double s = k * d0.h;
    ker[k + half] = std::exp(-s * s / (4.0 * eps_moll));
    mass += ker[k + half];
  }
  for (auto& w : ker) w /= mass;

  CartesianField tmp = d0, out = d0;
  for (int iy = 0; iy < d0.ny; ++iy)
    for (int ix = 0; ix < d0.nx; ++ix) {
      double s = 0.0;
      const int a = std::max(-half, -ix), b = std::min(half, d0.nx - 1 - ix);
      for (int k = a; k <= b; ++k) s += ker[k + half] * d0.at(ix + k, iy);
      tmp.at(ix, iy) = s;
    }
  for (int iy = 0; iy < d0.ny; ++iy) {
    const int a = std::max(-half, -iy), b = std::min(half, d0.ny - 1 - iy);
    for (int ix = 0; ix < d0.nx; ++ix) {
      double s = 0.0;
      for (int k = a; k <= b; ++k) s += ker[k + half] * tmp.at(ix, iy + k);
      out.at(ix, iy) = s;
    }
  }
  return out;
}

/// max over |α| = m of sup |∂^α f| by repeated second-order central differences.
inline double cartesian_derivative_sup(const CartesianField& f, int m, int margin = 0) {
  std::vector<CartesianField> level{f};
  auto diff = [](const CartesianField& g, bool along_x) {
    CartesianField out = g;
    std::fill(out.v.begin(), out.v.end(), 0.0);
    for (int iy = 1; iy + 1 < g.ny; ++iy)
      for (int ix = 1; ix + 1 < g.nx; ++ix)
        out.at(ix, iy) = along_x ? (g.at(ix + 1, iy) - g.at(ix - 1, iy)) / (2 * g.h)
                                 : (g.at(ix, iy + 1) - g.at(ix, iy - 1)) / (2 * g.h);
    return out;
  };
  for (int order = 1; order <= m; ++order) {
    std::vector<CartesianField> next;
    for (std::size_t a = 0; a < level.size(); ++a) next.push_back(diff(level[a], false));
    next.push_back(diff(level.back(), true));
    level = std::move(next);
  }
  const int pad = m + margin;
  double best = 0.0;
  for (const auto& g : level)
    for (int iy = pad; iy < g.ny - pad; ++iy)
      for (int ix = pad; ix < g.nx - pad; ++ix) best = std::max(best, std::abs(g.at(ix, iy)));
  return best;
}

/// C^∞ cutoff equal to 1 on [0, r_in] and 0 on [r_out, ∞).
inline double smooth_cutoff(double r, double r_in, double r_out) {
  if (r <= r_in) return 1.0;
  if (r >= r_out) return 0.0;
  const double t = (r_out - r) / (r_out - r_in);
  const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

struct DefiningOptions {
  double eps_moll = 1e-3;
  double support_radius = 4.0;  // d0 vanishes beyond this radius
  double cutoff_start = 2.5;
  double box_half_width = 4.5;
  double max_spacing = 0.02;
};

/// d0 = χ(|x|)(|x| − R(θ)) sampled on the embedding box.
inline CartesianField defining_seed(const ExteriorDomain& domain, const DefiningOptions& opts) {
  const double sigma = std::sqrt(2.0 * opts.eps_moll);
  require(opts.eps_moll > 0.0, ErrorKind::parameter, "eps_moll must be positive");
  require(domain.boundary.max_radius() < opts.cutoff_start, ErrorKind::geometry,
          "boundary extends past the seed cutoff radius");
  auto f = CartesianField::box(opts.box_half_width, std::min(sigma / 4.0, opts.max_spacing));
  f.fill([&](double x, double y) {
    const double r = std::hypot(x, y);
    return smooth_cutoff(r, opts.cutoff_start, opts.support_radius) * (r - domain.boundary.radius(std::atan2(y, x)));
  });
  return f;
}

/// d_ε on the solver grid as the lattice sum Σ h² G(x − x_l) d0(x_l) of the
/// sampled seed against the continuous heat kernel. The sum is entire in x, so
/// high derivatives on the grid carry no interpolation seams.
inline ScalarField mollify_to_grid(const CartesianField& d0, double eps_moll, const GridPtr& grid) {
  require(eps_moll > 0.0, ErrorKind::parameter, "eps_moll must be positive");
  const double sigma = std::sqrt(2.0 * eps_moll);
  const int half = static_cast<int>(std::ceil(10.0 * sigma / d0.h));
  const double norm = d0.h / std::sqrt(4.0 * kPi * eps_moll);
  std::vector<double> kx(2 * half + 2), ky(2 * half + 2);
  return ScalarField::from_function(grid, [&](double px, double py) {
    const int cx = static_cast<int>(std::lround((px - d0.x0) / d0.h));
    const int cy = static_cast<int>(std::lround((py - d0.y0) / d0.h));
    const int ax = std::max(0, cx - half), bx = std::min(d0.nx - 1, cx + half);
    const int ay = std::max(0, cy - half), by = std::min(d0.ny - 1, cy + half);
    if (ax > bx || ay > by) return 0.0;
    for (int ix = ax; ix <= bx; ++ix) {
      const double s = px - d0.x(ix);
      kx[ix - ax] = norm * std::exp(-s * s / (4.0 * eps_moll));
    }
    for (int iy = ay; iy <= by; ++iy) {
      const double s = py - d0.y(iy);
      ky[iy - ay] = norm * std::exp(-s * s / (4.0 * eps_moll));
    }
    double sum = 0.0;
    for (int iy = ay; iy <= by; ++iy) {
      double row = 0.0;
      for (int ix = ax; ix <= bx; ++ix) row += kx[ix - ax] * d0.at(ix, iy);
      sum += ky[iy - ay] * row;
    }
    return sum;
  });
}

/// Mollify the seed onto the grid and solve (−Δ + 1)ψ = (−Δ + 1)d_ε with
/// ψ = 0 on both rings.
inline DefiningFunction build_defining_function(const GridPtr& grid, const DefiningOptions& opts,
                                                SolveReport* report = nullptr) {
  const Grid& g = *grid;
  const ScalarField de = mollify_to_grid(defining_seed(g.domain(), opts), opts.eps_moll, grid);
  ScalarField f = de - laplacian(de);
  DefiningFunction out;
  out.psi = solve_dirichlet_helmholtz(f, nullptr, report);
  out.moll_param = opts.eps_moll;
  return out;
}

struct FrameOptions {
  double grad_threshold = 0.05;
};

/// X₀ = ∇ψ·∇, T = ψ₁∂₂ − ψ₂∂₁ and the recovery coefficients
/// ξ_k = ψ_k/|∇ψ|², η₁ = −ψ₂/|∇ψ|², η₂ = ψ₁/|∇ψ|² (zero off the collar).
inline TangentialFrame build_frame(DefiningFunction& psi, const SignedDistanceField& sdf,
                                   const ExteriorDomain& domain, const FrameOptions& opts = {}) {
  const GridPtr& grid = psi.psi.grid_ptr();
  const VectorField gp = grad(psi.psi);
  TangentialFrame fr;
  fr.x0_coeffs = gp;
  fr.b = VectorField(-gp.y, gp.x);
  fr.xi = VectorField(grid);
  fr.eta = VectorField(grid);
  fr.valid_region = collar_mask(sdf, domain.collar_width);
  double lo = std::numeric_limits<double>::max();
  for (std::size_t k = 0; k < fr.valid_region.size(); ++k) {
    if (!fr.valid_region[k]) continue;
    const double q = gp.x[k] * gp.x[k] + gp.y[k] * gp.y[k];
    lo = std::min(lo, std::sqrt(q));
    if (q == 0.0) continue;
    fr.xi.x[k] = gp.x[k] / q;
    fr.xi.y[k] = gp.y[k] / q;
    fr.eta.x[k] = -gp.y[k] / q;
    fr.eta.y[k] = gp.x[k] / q;
  }
  psi.grad_lower_bound = lo;
  require(lo >= opts.grad_threshold, ErrorKind::geometry,
          "degenerate frame: min |grad psi| on the collar is " + std::to_string(lo) + " < " +
              std::to_string(opts.grad_threshold));
  return fr;
}

/// max over the inner boundary of |T d|.
inline double tangency_residual(const TangentialFrame& frame, const SignedDistanceField& sdf) {
  const ScalarField td = apply_tangential(frame, sdf.d);
  return max_abs_rows(td, 0, 0);
}

/// max over the collar and k of |ξ_k X₀f + η_k Tf − ∂_k f|, where ∂_k f is
/// supplied independently (exact derivatives, for instance).
inline double span_residual(const TangentialFrame& frame, const ScalarField& f, const VectorField& df) {
  const VectorField g = grad(f);
  const ScalarField x0f = frame.x0_coeffs.x * g.x + frame.x0_coeffs.y * g.y;
  const ScalarField tf = frame.b.x * g.x + frame.b.y * g.y;
  double worst = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (!frame.valid_region[k]) continue;
    worst = std::max(worst, std::abs(frame.xi.x[k] * x0f[k] + frame.eta.x[k] * tf[k] - df.x[k]));
    worst = std::max(worst, std::abs(frame.xi.y[k] * x0f[k] + frame.eta.y[k] * tf[k] - df.y[k]));
  }
  return worst;
}

/// Fits |∂ₓᵐ f| ≲ C Rᵐ m! over 1 ≤ m ≤ m_max on the mask by least squares in
/// log scale and returns the radius 1/R.
inline double analyticity_radius(const ScalarField& f, const std::vector<char>& mask, int m_max) {
  const auto tens = spatial_tensors(f, m_max);
  std::vector<double> xs, ys;
  double lf = 0.0;
  for (int m = 1; m <= m_max; ++m) {
    lf += std::log(static_cast<double>(m));
    double a = 0.0;
    for (const auto& c : tens[m]) a = std::max(a, max_abs_masked(c, mask));
    if (a <= 0.0) continue;
    xs.push_back(m);
    ys.push_back(std::log(a) - lf);
  }
  if (xs.size() < 2) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return std::exp(-slope);
}

/// Everything the solvers and checks need about one geometry.
struct Geometry {
  ExteriorDomain domain;
  GridPtr grid;
  SignedDistanceField sdf;
  VectorField nu;
  DefiningFunction defining;
  TangentialFrame frame;
  SolveReport helmholtz;
};

inline Geometry build_geometry(const ExteriorDomain& domain, int n_r, int n_theta, const DefiningOptions& dopts = {},
                               const FrameOptions& fopts = {}) {
  Geometry g;
  g.domain = domain;
  g.grid = make_grid(domain, n_r, n_theta);
  g.sdf = signed_distance(g.grid);
  g.nu = extend_normal(g.sdf, domain);
  g.defining = build_defining_function(g.grid, dopts, &g.helmholtz);
  g.frame = build_frame(g.defining, g.sdf, domain, fopts);
  return g;
}

}  // namespace machlab

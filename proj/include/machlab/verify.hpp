#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <functional>
#include <future>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "machlab/config.hpp"
#include "machlab/elliptic.hpp"
#include "machlab/errors.hpp"
#include "machlab/fieldops.hpp"
#include "machlab/geometry.hpp"
#include "machlab/norms.hpp"

namespace machlab {

// ---------------------------------------------------------------------------
// Test field families
// ---------------------------------------------------------------------------

using ScalarGen = std::function<ScalarField(const GridPtr&)>;
using VectorGen = std::function<VectorField(const GridPtr&)>;

struct NamedScalar {
  std::string id;
  ScalarGen make;
};

struct NamedVector {
  std::string id;
  VectorGen make;
};

/// g(r)·Σ_{m≤M} (a_m cos mθ + b_m sin mθ) with a Gaussian radial profile
/// g(r) = exp(−((r − c)/w)²). Parameters do not depend on the grid, so the
/// same field can be sampled at several resolutions.
struct FourierProfile {
  std::vector<double> a, b;
  double center = 2.0;
  double width = 1.0;

  double operator()(double x, double y) const {
    const double r = std::hypot(x, y), t = std::atan2(y, x);
    double s = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) s += a[m] * std::cos(m * t) + b[m] * std::sin(m * t);
    const double z = (r - center) / width;
    return std::exp(-z * z) * s;
  }
};

class RandomFieldFamily {
 public:
  static constexpr std::uint64_t kDefaultSeed = 20240601;

  explicit RandomFieldFamily(std::uint64_t seed = kDefaultSeed, int max_mode = 3) : rng_(seed), max_mode_(max_mode) {}

  FourierProfile next_profile() {
    std::uniform_real_distribution<double> coef(-1.0, 1.0), center(1.2, 2.5), width(0.7, 1.2);
    FourierProfile p;
    p.a.resize(max_mode_ + 1);
    p.b.resize(max_mode_ + 1);
    for (int m = 0; m <= max_mode_; ++m) {
      p.a[m] = coef(rng_);
      p.b[m] = m == 0 ? 0.0 : coef(rng_);
    }
    p.center = center(rng_);
    p.width = width(rng_);
    return p;
  }

  std::vector<NamedScalar> scalars(int n, const std::string& prefix = "rand") {
    std::vector<NamedScalar> out;
    for (int i = 0; i < n; ++i) {
      FourierProfile p = next_profile();
      out.push_back({prefix + std::to_string(i),
                     [p](const GridPtr& g) { return ScalarField::from_function(g, p); }});
    }
    return out;
  }

  /// Vector fields (u₁, u₂) with their n̂-component damped near the wall so that v·ν = 0.
  std::vector<NamedVector> tangential_vectors(int n, const std::string& prefix = "rand") {
    std::vector<NamedVector> out;
    for (int i = 0; i < n; ++i) {
      FourierProfile p = next_profile(), q = next_profile();
      out.push_back({prefix + std::to_string(i), [p, q](const GridPtr& g) {
                       return make_tangential(VectorField::from_function(
                           g, [&](double x, double y) { return Vec2{p(x, y), q(x, y)}; }));
                     }});
    }
    return out;
  }

  std::vector<NamedVector> vectors(int n, const std::string& prefix = "rand") {
    std::vector<NamedVector> out;
    for (int i = 0; i < n; ++i) {
      FourierProfile p = next_profile(), q = next_profile();
      out.push_back({prefix + std::to_string(i), [p, q](const GridPtr& g) {
                       return VectorField::from_function(g, [&](double x, double y) { return Vec2{p(x, y), q(x, y)}; });
                     }});
    }
    return out;
  }

  /// w − (w·n̂) n̂ exp(−((ρ − 1)/0.5)²), n̂ = ∇ρ/|∇ρ|; vanishes normally on the wall.
  static VectorField make_tangential(VectorField w) {
    const GridPtr& grid = w.grid_ptr();
    const Grid& g = *grid;
    const VectorField n = rho_direction(grid);
    for (int i = 0; i < g.n_r(); ++i) {
      const double z = (g.rho()[i] - 1.0) / 0.5;
      const double damp = std::exp(-z * z);
      for (int j = 0; j < g.n_theta(); ++j) {
        const std::size_t k = g.index(i, j);
        const double wn = w.x[k] * n.x[k] + w.y[k] * n.y[k];
        w.x[k] -= damp * wn * n.x[k];
        w.y[k] -= damp * wn * n.y[k];
      }
    }
    return w;
  }

 private:
  std::mt19937_64 rng_;
  int max_mode_;
};

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct RatioRow {
  std::string field_id;
  std::string quantity;
  int level = 0;  // index into InequalityReport::levels
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  int power = 1;  // the row is compared as ratio^(1/power) against the constant
};

struct InequalityReport {
  std::string name;
  std::vector<RatioRow> rows;
  std::vector<int> levels;                 // n_r of each refinement level, coarse to fine
  std::vector<double> constants;           // fitted constant per level
  double constant = 0.0;                   // finest level
  double slack = 0.2;
  std::vector<double> refinement_orders;   // observed decay orders where meaningful
  std::vector<std::string> notes;
  bool pass = false;
};

namespace detail {

inline std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

inline double scaled_ratio(const RatioRow& r) {
  return r.power == 1 ? r.ratio : std::pow(r.ratio, 1.0 / r.power);
}

/// Constant per level = max scaled ratio; pass when every level is finite,
/// within `slack` of the finest one, and every row sits under C·(1 + slack).
inline void fit_constants(InequalityReport& rep) {
  const std::size_t nl = rep.levels.size();
  rep.constants.assign(nl, 0.0);
  bool finite = !rep.rows.empty();
  for (const auto& r : rep.rows) {
    const double s = scaled_ratio(r);
    if (!std::isfinite(s)) {
      finite = false;
      continue;
    }
    rep.constants[r.level] = std::max(rep.constants[r.level], s);
  }
  rep.constant = nl ? rep.constants.back() : 0.0;
  bool stable = rep.constant > 0.0;
  for (double c : rep.constants) stable = stable && std::abs(c / rep.constant - 1.0) <= rep.slack;
  bool bounded = true;
  for (const auto& r : rep.rows) bounded = bounded && scaled_ratio(r) <= rep.constant * (1.0 + rep.slack);
  rep.pass = finite && stable && bounded;
  if (!stable) rep.notes.push_back("constant changes by more than the slack under refinement");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Norm helpers (L² over the non-sponge region, same quadrature as the norms)
// ---------------------------------------------------------------------------

/// ‖∂ₓʲ f‖ for the full (non-symmetrized) derivative tensor.
inline double derivative_norm(const ScalarField& f, int j) {
  if (j == 0) return l2_norm(f);
  const auto t = spatial_tensors(f, j);
  return l2_norm(std::span<const ScalarField>(t[j]), tensor_multiplicity(j));
}

inline double derivative_norm(const VectorField& v, int j) {
  const double a = derivative_norm(v.x, j), b = derivative_norm(v.y, j);
  return std::hypot(a, b);
}

/// ‖·‖_{H^s} = (Σ_{j≤s} ‖∂ₓʲ·‖²)^{1/2}.
inline double sobolev_norm(const VectorField& v, int s) {
  double acc = 0.0;
  for (int j = 0; j <= s; ++j) {
    const double n = derivative_norm(v, j);
    acc += n * n;
  }
  return std::sqrt(acc);
}

/// H^s norm of a list of scalar components with multiplicities.
inline double sobolev_norm(const std::vector<ScalarField>& comps, const std::vector<double>& mult, int s) {
  double acc = 0.0;
  for (std::size_t c = 0; c < comps.size(); ++c)
    for (int j = 0; j <= s; ++j) {
      const double n = derivative_norm(comps[c], j);
      acc += mult[c] * n * n;
    }
  return std::sqrt(acc);
}

inline double masked_l2(const ScalarField& f, const std::vector<char>& mask) {
  const auto& w = f.grid().quadrature();
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k)
    if (mask[k]) s += w[k] * f[k] * f[k];
  return std::sqrt(s);
}

/// Sup over the mask of the Euclidean norm of the tensor ∂ₓʲ(v₁, v₂).
inline double tensor_sup(const std::vector<ScalarField>& cx, const std::vector<ScalarField>& cy, int j,
                         const std::vector<char>& mask) {
  const auto m = tensor_multiplicity(j);
  double best = 0.0;
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (!mask[k]) continue;
    double s = 0.0;
    for (int a = 0; a <= j; ++a) s += m[a] * (cx[a][k] * cx[a][k] + cy[a][k] * cy[a][k]);
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Refinement levels
// ---------------------------------------------------------------------------

/// One resolution of the configured geometry with the unramped collar normal
/// ν = −∇d (smooth across the whole collar, unlike the ramped extension).
struct VerifyLevel {
  Geometry geo;
  VectorField nu;
};

inline VerifyLevel make_level(const ExteriorDomain& domain, int n_r, int n_theta, const DefiningOptions& dopts = {}) {
  VerifyLevel l{build_geometry(domain, n_r, n_theta, dopts), VectorField()};
  l.nu = VectorField(-1.0 * l.geo.sdf.gradient.x, -1.0 * l.geo.sdf.gradient.y);
  return l;
}

/// T + s·∂_ρ-direction: a frame that is no longer tangent to the wall.
inline TangentialFrame corrupt_frame(const TangentialFrame& frame, double strength = 0.1) {
  TangentialFrame out = frame;
  const VectorField n = rho_direction(frame.grid_ptr());
  out.b.axpy(strength, n);
  return out;
}

namespace detail {
inline InequalityReport new_report(const std::string& name, const std::vector<const VerifyLevel*>& levels,
                                   double slack) {
  InequalityReport rep;
  rep.name = name;
  rep.slack = slack;
  for (const auto* l : levels) rep.levels.push_back(l->geo.grid->n_r());
  return rep;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

/// Frame certificate: max_{∂Ω}|T d| and the span-recovery residual on the
/// collar against exact derivatives of sin x₁ cos x₂, each against `tol`.
inline InequalityReport check_frame(const TangentialFrame& frame, const SignedDistanceField& sdf, double tol = 1e-6) {
  InequalityReport rep;
  rep.name = "frame_certificate";
  rep.levels = {frame.grid().n_r()};
  rep.slack = 0.0;
  const GridPtr& g = frame.grid_ptr();
  const ScalarField f = ScalarField::from_function(g, [](double x, double y) { return std::sin(x) * std::cos(y); });
  const VectorField df = VectorField::from_function(
      g, [](double x, double y) { return Vec2{std::cos(x) * std::cos(y), -std::sin(x) * std::sin(y)}; });
  const double tan = tangency_residual(frame, sdf), span = span_residual(frame, f, df);
  rep.rows.push_back({"wall", "tangency", 0, tan, tol, tan / tol});
  rep.rows.push_back({"sin_cos", "span", 0, span, tol, span / tol});
  rep.constant = std::max(tan, span) / tol;
  rep.constants = {rep.constant};
  rep.pass = std::isfinite(rep.constant) && rep.constant <= 1.0;
  if (!rep.pass) rep.notes.push_back("tangency or span residual exceeds " + detail::sci(tol));
  return rep;
}

/// ρ_j = ‖∂ʲu‖ / (‖u‖^{1/(j+1)} ‖∂^{j+1}u‖^{j/(j+1)}) for 1 ≤ j ≤ j_max; the
/// constant is the smallest C₁ with ρ_j ≤ C₁ʲ.
inline InequalityReport check_interpolation(const std::vector<NamedScalar>& fields,
                                            const std::vector<const VerifyLevel*>& levels, int j_max = 8,
                                            double slack = 0.2) {
  require(j_max >= 1 && j_max <= 8, ErrorKind::parameter, "interpolation check needs 1 <= J_max <= 8");
  auto rep = detail::new_report("interpolation", levels, slack);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    for (const auto& nf : fields) {
      const ScalarField u = nf.make(levels[l]->geo.grid);
      const auto t = spatial_tensors(u, j_max + 1);
      std::vector<double> n(j_max + 2);
      for (int j = 0; j <= j_max + 1; ++j)
        n[j] = l2_norm(std::span<const ScalarField>(t[j]), tensor_multiplicity(j));
      for (int j = 1; j <= j_max; ++j) {
        if (n[0] <= 0.0 || n[j + 1] <= 1e-12 * n[0]) {
          rep.notes.push_back(nf.id + ": vanishing denominator at j=" + std::to_string(j) + ", skipped");
          continue;
        }
        const double den = std::pow(n[0], 1.0 / (j + 1)) * std::pow(n[j + 1], static_cast<double>(j) / (j + 1));
        rep.rows.push_back({nf.id, "rho_" + std::to_string(j), static_cast<int>(l), n[j], den, n[j] / den, j});
      }
    }
  }
  detail::fit_constants(rep);
  return rep;
}

/// ‖∇v‖ / (‖div v‖ + ‖curl v‖ + ‖v‖) on fields with v·ν = 0.
inline InequalityReport check_divcurl(const std::vector<NamedVector>& fields,
                                      const std::vector<const VerifyLevel*>& levels, double slack = 0.2) {
  auto rep = detail::new_report("divcurl", levels, slack);
  for (std::size_t l = 0; l < levels.size(); ++l)
    for (const auto& nf : fields) {
      const VectorField v = nf.make(levels[l]->geo.grid);
      const double lhs = derivative_norm(v, 1);
      const double rhs = l2_norm(div(v)) + l2_norm(curl2d(v)) + l2_norm(v);
      if (rhs == 0.0) {
        rep.notes.push_back(nf.id + ": zero field, skipped");
        continue;
      }
      rep.rows.push_back({nf.id, "grad_v", static_cast<int>(l), lhs, rhs, lhs / rhs});
    }
  detail::fit_constants(rep);
  return rep;
}

/// ‖v‖_{H²} / (‖Δv‖ + ‖Tv‖_{H¹} + ‖v‖) with the frame's T.
inline InequalityReport check_h2(const std::vector<NamedVector>& fields, const std::vector<const VerifyLevel*>& levels,
                                 double slack = 0.2) {
  auto rep = detail::new_report("h2", levels, slack);
  for (std::size_t l = 0; l < levels.size(); ++l)
    for (const auto& nf : fields) {
      const auto& frame = levels[l]->geo.frame;
      const VectorField v = nf.make(levels[l]->geo.grid);
      const double lhs = sobolev_norm(v, 2);
      const double rhs = l2_norm(laplacian(v)) + sobolev_norm(apply_tangential(frame, v), 1) + l2_norm(v);
      if (rhs == 0.0) {
        rep.notes.push_back(nf.id + ": zero field, skipped");
        continue;
      }
      rep.rows.push_back({nf.id, "h2", static_cast<int>(l), lhs, rhs, lhs / rhs});
    }
  detail::fit_constants(rep);
  return rep;
}

namespace detail {

/// Components of [T, ∂ₓᵐ] v for both Cartesian components (empty for m = 0).
inline std::pair<std::vector<ScalarField>, std::vector<double>> tangential_partial_commutator(
    const TangentialFrame& frame, const VectorField& v, int m) {
  std::vector<ScalarField> comps;
  std::vector<double> mult;
  if (m == 0) return {comps, mult};
  const auto w = tensor_multiplicity(m);
  for (const ScalarField* c : {&v.x, &v.y})
    for (int a = 0; a <= m; ++a) {
      comps.push_back(commutator_partial_direct(frame, *c, m, a));
      mult.push_back(w[a]);
    }
  return {comps, mult};
}

/// Unique components of ∂ₓᵐ v (both Cartesian components) with multiplicities.
inline std::pair<std::vector<ScalarField>, std::vector<double>> partial_components(const VectorField& v, int m) {
  std::vector<ScalarField> comps;
  std::vector<double> mult;
  const auto w = tensor_multiplicity(m);
  for (const ScalarField* c : {&v.x, &v.y}) {
    auto t = spatial_tensors(*c, m);
    for (int a = 0; a <= m; ++a) {
      comps.push_back(std::move(t[m][a]));
      mult.push_back(w[a]);
    }
  }
  return {comps, mult};
}

}  // namespace detail

/// Left and right sides of the derivative reductions with every commutator
/// term evaluated from the discrete operators:
///   (08)  ‖Tᵏv‖ ≤ C ‖∂ₓTᵏ⁻¹v‖,                        k = 1, 2
///   (72)  ‖∂ₓv‖ ≤ C (‖div v‖ + ‖curl v‖ + ‖v‖)
///   (53)  ‖∂ₓʲv‖ ≤ C (‖∂ₓʲ⁻¹div v‖ + ‖∂ₓʲ⁻¹curl v‖ + ‖∂ₓʲ⁻²Tv‖_{H¹}
///                     + ‖∂ₓʲ⁻²v‖ + ‖[T, ∂ₓʲ⁻²]v‖_{H¹}),    j = 2, 3 (k = 0)
///   (14)  ‖∂ₓTᵏv‖ ≤ C (‖Tᵏdiv v‖ + ‖Tᵏcurl v‖ + ‖Tᵏv‖ + ‖[Tᵏ,div]v‖ + ‖[Tᵏ,curl]v‖
///                     + Σ_l C(k,l)(‖∂ₓTᵏ⁻ˡv‖‖Tˡν‖_∞ + ‖Tᵏ⁻ˡv‖‖∂ₓTˡν‖_∞ + ‖Tᵏ⁻ˡv‖‖Tˡν‖_∞)),
///         k = 1, 2, sup norms over the collar.
inline std::vector<InequalityReport> check_reductions(const std::vector<NamedVector>& fields,
                                                      const std::vector<const VerifyLevel*>& levels,
                                                      double slack = 0.2) {
  std::vector<InequalityReport> reps;
  for (const char* name : {"eq08_k1", "eq08_k2", "eq72", "eq53_j2", "eq53_j3", "eq14_k1", "eq14_k2"})
    reps.push_back(detail::new_report(name, levels, slack));
  auto add = [&](int r, const std::string& id, int level, double lhs, double rhs) {
    if (rhs == 0.0) return;
    reps[r].rows.push_back({id, reps[r].name, level, lhs, rhs, lhs / rhs});
  };
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const int l = static_cast<int>(li);
    const auto& lev = *levels[li];
    const auto& frame = lev.geo.frame;
    const auto& mask = frame.valid_region;
    // ‖Tˡν‖_∞ and ‖∂ₓTˡν‖_∞ on the collar
    std::vector<double> tnu(3), dtnu(3);
    VectorField tn = lev.nu;
    for (int q = 0; q <= 2; ++q) {
      const auto gx = spatial_tensors(tn.x, 1), gy = spatial_tensors(tn.y, 1);
      tnu[q] = tensor_sup(gx[0], gy[0], 0, mask);
      dtnu[q] = tensor_sup(gx[1], gy[1], 1, mask);
      tn = apply_tangential(frame, tn);
    }
    for (const auto& nf : fields) {
      const VectorField v = nf.make(lev.geo.grid);
      const ScalarField dv = div(v), cv = curl2d(v);
      std::vector<VectorField> tv{v};
      for (int q = 1; q <= 2; ++q) tv.push_back(apply_tangential(frame, tv.back()));
      const double n_v = l2_norm(v);

      add(0, nf.id, l, l2_norm(tv[1]), derivative_norm(tv[0], 1));
      add(1, nf.id, l, l2_norm(tv[2]), derivative_norm(tv[1], 1));
      add(2, nf.id, l, derivative_norm(v, 1), l2_norm(dv) + l2_norm(cv) + n_v);

      for (int j = 2; j <= 3; ++j) {
        const auto [dj2, mj2] = detail::partial_components(tv[1], j - 2);
        const auto [cm, mm] = detail::tangential_partial_commutator(frame, v, j - 2);
        const double rhs = derivative_norm(dv, j - 1) + derivative_norm(cv, j - 1) + sobolev_norm(dj2, mj2, 1) +
                           derivative_norm(v, j - 2) + (cm.empty() ? 0.0 : sobolev_norm(cm, mm, 1));
        add(j == 2 ? 3 : 4, nf.id, l, derivative_norm(v, j), rhs);
      }

      for (int k = 1; k <= 2; ++k) {
        double rhs = l2_norm(apply_tangential_power(frame, dv, k)) + l2_norm(apply_tangential_power(frame, cv, k)) +
                     l2_norm(tv[k]) + l2_norm(commutator_div_direct(frame, v, k)) +
                     l2_norm(commutator_curl_direct(frame, v, k));
        for (int q = 1; q <= k; ++q)
          rhs += binomial(k, q) * (derivative_norm(tv[k - q], 1) * tnu[q] + l2_norm(tv[k - q]) * dtnu[q] +
                                   l2_norm(tv[k - q]) * tnu[q]);
        add(k == 1 ? 5 : 6, nf.id, l, derivative_norm(tv[k], 1), rhs);
      }
    }
  }
  for (auto& r : reps) detail::fit_constants(r);
  // (08), k = 1: pointwise |b·∇f| ≤ |b||∇f| caps the constant by sup|b|.
  double bmax = 0.0;
  const auto& fine = *levels.back();
  for (std::size_t k = 0; k < fine.geo.grid->size(); ++k)
    if (fine.geo.grid->quadrature()[k] > 0.0)
      bmax = std::max(bmax, std::hypot(fine.geo.frame.b.x[k], fine.geo.frame.b.y[k]));
  reps[0].notes.push_back("sup|b| over the quadrature region = " + detail::sci(bmax));
  if (reps[0].constant > bmax * (1.0 + 1e-9)) {
    reps[0].pass = false;
    reps[0].notes.push_back("constant exceeds sup|b|");
  }
  return reps;
}

/// Sup-norm of ∂ₓʲTᵏν over the collar for j + k ≤ m_max; entry [j][k].
inline std::vector<std::vector<double>> normal_derivative_sups(const VerifyLevel& lev, int m_max) {
  const auto& frame = lev.geo.frame;
  const auto& mask = frame.valid_region;
  std::vector<std::vector<double>> n(m_max + 1, std::vector<double>(m_max + 1, 0.0));
  VectorField tn = lev.nu;
  for (int k = 0; k <= m_max; ++k) {
    const auto tx = spatial_tensors(tn.x, m_max - k), ty = spatial_tensors(tn.y, m_max - k);
    for (int j = 0; j + k <= m_max; ++j) n[j][k] = tensor_sup(tx[j], ty[j], j, mask);
    if (k < m_max) tn = apply_tangential(frame, tn);
  }
  return n;
}

/// W(η) = Σ_{j+k≤M} η^{j+k}/(j+k−3)!·‖∂ₓʲTᵏν‖_∞ with (n−3)! = 1 for n ≤ 3.
inline double normal_weighted_sum(const std::vector<std::vector<double>>& n, double eta) {
  const int m = static_cast<int>(n.size()) - 1;
  double s = 0.0;
  for (int j = 0; j <= m; ++j)
    for (int k = 0; j + k <= m; ++k) s += std::pow(eta, j + k) / factorial(j + k - 3) * n[j][k];
  return s;
}

/// Largest η with W(η) ≤ bound (W is increasing in η).
inline double fit_normal_radius(const std::vector<std::vector<double>>& n, double bound) {
  if (normal_weighted_sum(n, 0.0) > bound) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (normal_weighted_sum(n, hi) <= bound && hi < 1e6) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_weighted_sum(n, mid) <= bound ? lo : hi) = mid;
  }
  return lo;
}

/// ‖∂ₓʲν‖ on the unit circle at r = 1 (its sup over the exterior collar), from
/// ν = −z^{1/2} z̄^{−1/2} in Wirtinger form:
///   Σ_{ordered} |∂…ν|² = 2ʲ Σ_p C(j,p) |(½)_p|² |(−½)_{j−p}|²  (falling factorials).
inline double circle_normal_derivative_sup(int j) {
  double sum = 0.0;
  for (int p = 0; p <= j; ++p) {
    double a = 1.0, b = 1.0;
    for (int i = 0; i < p; ++i) a *= 0.5 - i;
    for (int i = 0; i < j - p; ++i) b *= -0.5 - i;
    sum += binomial(j, p) * a * a * b * b;
  }
  return std::sqrt(std::pow(2.0, j) * sum);
}

/// Fits η̃ with Σ η̃^{j+k}/(j+k−3)!·‖∂ₓʲTᵏν‖_{L∞(collar)} ≤ bound per level.
inline InequalityReport check_normal_analyticity(const std::vector<const VerifyLevel*>& levels, int m_max = 8,
                                                 double bound = 10.0, double slack = 0.2) {
  require(m_max >= 1 && m_max <= 8, ErrorKind::parameter, "normal analyticity check needs 1 <= M_max <= 8");
  auto rep = detail::new_report("normal_analyticity", levels, slack);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto n = normal_derivative_sups(*levels[l], m_max);
    const double eta = fit_normal_radius(n, bound);
    rep.constants.push_back(eta);
    for (int j = 0; j <= m_max; ++j)
      for (int k = 0; j + k <= m_max; ++k) {
        const double w = std::pow(eta, j + k) / factorial(j + k - 3);
        rep.rows.push_back({"nu", "d" + std::to_string(j) + "T" + std::to_string(k), static_cast<int>(l), n[j][k], w,
                            n[j][k] * w});
      }
    if (levels[l]->geo.domain.circular()) {
      double worst = 0.0;
      for (int j = 1; j <= std::min(m_max, 3); ++j) {
        const double c = circle_normal_derivative_sup(j);
        worst = std::max(worst, std::abs(n[j][0] - c) / c);
      }
      rep.notes.push_back("level " + std::to_string(l) + ": closed-form mismatch for j <= 3 is " +
                          detail::sci(worst));
    }
  }
  rep.constant = rep.constants.back();
  bool stable = rep.constant > 0.0 && std::isfinite(rep.constant);
  for (double c : rep.constants) stable = stable && c > 0.0 && std::abs(c / rep.constant - 1.0) <= slack;
  rep.pass = stable;
  if (!stable) rep.notes.push_back("fitted radius vanishes or moves by more than the slack");
  return rep;
}

/// Direct versus Leibniz evaluation of [Tᵏ, ∂_s], [Tᵏ, div], [Tᵏ, curl]
/// (tolerance `tol`) and of [∂ₓᵏ, T] (tolerance `partial_tol`) for k ≤ 3, as
/// relative L² errors on the collar. The constant is the worst relative error
/// on the finest level; decay orders are measured between the last two levels.
inline InequalityReport check_commutator_suite(const std::vector<NamedScalar>& scalars,
                                               const std::vector<NamedVector>& vectors,
                                               const std::vector<const VerifyLevel*>& levels, int k_max = 3,
                                               double tol = 1e-7, double partial_tol = 1e-5) {
  require(k_max >= 1 && k_max <= 3, ErrorKind::parameter, "commutator suite needs 1 <= k <= 3");
  auto rep = detail::new_report("commutator_suite", levels, 0.0);
  auto add = [&](const std::string& id, const std::string& q, int l, const ScalarField& d, const ScalarField& e,
                 const std::vector<char>& mask) {
    const double scale = masked_l2(d, mask);
    const double err = masked_l2(d - e, mask);
    rep.rows.push_back({id, q, l, err, scale, scale > 0.0 ? err / scale : err});
  };
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const int l = static_cast<int>(li);
    const auto& frame = levels[li]->geo.frame;
    const auto& mask = frame.valid_region;
    const auto& grid = levels[li]->geo.grid;
    for (const auto& nf : scalars) {
      const ScalarField f = nf.make(grid);
      for (int k = 1; k <= k_max; ++k) {
        const std::string ks = std::to_string(k);
        for (Axis a : {Axis::x1, Axis::x2})
          add(nf.id, "[T^" + ks + ",d" + (a == Axis::x1 ? "1" : "2") + "]", l, commutator_direct(frame, f, k, a),
              commutator_leibniz(frame, f, k, a), mask);
        for (int a = 0; a <= k; ++a)
          add(nf.id, "[d^" + ks + "_" + std::to_string(a) + ",T]", l, commutator_partial_direct(frame, f, k, a),
              commutator_partial_leibniz(frame, f, k, a), mask);
      }
    }
    for (const auto& nv : vectors) {
      const VectorField v = nv.make(grid);
      for (int k = 1; k <= k_max; ++k) {
        const std::string ks = std::to_string(k);
        add(nv.id, "[T^" + ks + ",div]", l, commutator_div_direct(frame, v, k), commutator_div_leibniz(frame, v, k),
            mask);
        add(nv.id, "[T^" + ks + ",curl]", l, commutator_curl_direct(frame, v, k),
            commutator_curl_leibniz(frame, v, k), mask);
      }
    }
  }
  auto is_partial = [](const RatioRow& r) { return r.quantity.rfind("[d^", 0) == 0; };
  const int fine = static_cast<int>(levels.size()) - 1;
  double worst_t = 0.0, worst_p = 0.0;
  bool finite = !rep.rows.empty();
  for (const auto& r : rep.rows) {
    finite = finite && std::isfinite(r.ratio);
    if (r.level != fine) continue;
    (is_partial(r) ? worst_p : worst_t) = std::max(is_partial(r) ? worst_p : worst_t, r.ratio);
  }
  rep.constants.assign(levels.size(), 0.0);
  for (const auto& r : rep.rows) rep.constants[r.level] = std::max(rep.constants[r.level], r.ratio);
  rep.constant = rep.constants.back();
  // Decay: every quantity must shrink from the previous level unless it is
  // already at round-off.
  bool decays = true;
  if (levels.size() >= 2) {
    const double hr = static_cast<double>(rep.levels[fine]) / rep.levels[fine - 1];
    std::map<std::pair<std::string, std::string>, double> coarse;
    for (const auto& r : rep.rows)
      if (r.level == fine - 1) coarse[{r.field_id, r.quantity}] = r.ratio;
    double min_order = std::numeric_limits<double>::infinity();
    for (const auto& r : rep.rows) {
      if (r.level != fine) continue;
      const double c = coarse[{r.field_id, r.quantity}];
      if (r.ratio <= 1e-12 || c <= 1e-12) continue;
      const double order = std::log(c / r.ratio) / std::log(hr);
      min_order = std::min(min_order, order);
    }
    if (std::isfinite(min_order)) {
      rep.refinement_orders.push_back(min_order);
      decays = min_order >= 2.0;
    }
  }
  rep.notes.push_back("worst relative error [T^k, Z]: " + detail::sci(worst_t) + " (tol " + detail::sci(tol) +
                      ")");
  rep.notes.push_back("worst relative error [d^k, T]: " + detail::sci(worst_p) + " (tol " +
                      detail::sci(partial_tol) + ")");
  rep.pass = finite && decays && worst_t <= tol && worst_p <= partial_tol;
  return rep;
}

}  // namespace machlab

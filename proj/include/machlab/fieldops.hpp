#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "machlab/errors.hpp"
#include "machlab/field.hpp"
#include "machlab/frame.hpp"

namespace machlab {

enum class Axis { x1 = 0, x2 = 1 };

/// Radial and angular derivatives of a field along the grid coordinates.
struct GridDerivatives {
  ScalarField d_rho;
  ScalarField d_theta;
};

inline GridDerivatives grid_derivatives(const ScalarField& f) {
  const Grid& g = f.grid();
  GridDerivatives out{ScalarField(f.grid_ptr()), ScalarField(f.grid_ptr())};
  g.apply_d_rho(f.values(), out.d_rho.values());
  g.apply_d_theta(f.values(), out.d_theta.values(), 1);
  return out;
}

/// Cartesian gradient by the chain rule through (ρ, θ).
inline VectorField grad(const ScalarField& f) {
  const Grid& g = f.grid();
  const auto gd = grid_derivatives(f);
  VectorField out(f.grid_ptr());
  const auto &rx = g.rho_x(), &ry = g.rho_y(), &tx = g.theta_x(), &ty = g.theta_y();
  for (std::size_t k = 0; k < f.size(); ++k) {
    out.x[k] = rx[k] * gd.d_rho[k] + tx[k] * gd.d_theta[k];
    out.y[k] = ry[k] * gd.d_rho[k] + ty[k] * gd.d_theta[k];
  }
  return out;
}

inline ScalarField apply_partial(const ScalarField& f, Axis axis) {
  auto g = grad(f);
  return axis == Axis::x1 ? std::move(g.x) : std::move(g.y);
}

inline ScalarField div(const VectorField& v) {
  auto a = grad(v.x);
  auto b = grad(v.y);
  return a.x + b.y;
}

/// ∂₁v₂ − ∂₂v₁
inline ScalarField curl2d(const VectorField& v) {
  auto a = grad(v.x);
  auto b = grad(v.y);
  return b.x - a.y;
}

/// ∇^⊥f = (−∂₂f, ∂₁f)
inline VectorField perp_grad(const ScalarField& f) {
  auto g = grad(f);
  return VectorField(-g.y, std::move(g.x));
}

/// Laplacian with the direct second-derivative stencil in ρ and spectral
/// θ-derivatives: Δf = |∇ρ|² f_ρρ + 2∇ρ·∇θ f_ρθ + |∇θ|² f_θθ + Δρ f_ρ.
inline ScalarField laplacian(const ScalarField& f) {
  const Grid& g = f.grid();
  ScalarField frr(f.grid_ptr()), fr(f.grid_ptr()), ftt(f.grid_ptr());
  g.apply_d_rho2(f.values(), frr.values());
  g.apply_d_rho(f.values(), fr.values());
  g.apply_d_theta(f.values(), ftt.values(), 2);
  ScalarField out(f.grid_ptr());
  const auto &grr = g.g_rr(), &gtt = g.g_tt(), &lr = g.lap_rho();
  for (std::size_t k = 0; k < f.size(); ++k) out[k] = grr[k] * frr[k] + gtt[k] * ftt[k] + lr[k] * fr[k];
  if (!g.circular()) {
    ScalarField ft(f.grid_ptr()), frt(f.grid_ptr());
    g.apply_d_theta(f.values(), ft.values(), 1);
    g.apply_d_rho(ft.values(), frt.values());
    const auto& grt = g.g_rt();
    for (std::size_t k = 0; k < f.size(); ++k) out[k] += 2.0 * grt[k] * frt[k];
  }
  return out;
}

inline VectorField laplacian(const VectorField& v) { return {laplacian(v.x), laplacian(v.y)}; }

/// Unit normal ν of the exterior domain on the inner ring (points into the body).
inline VectorField wall_normal(const GridPtr& grid) {
  const Grid& g = *grid;
  VectorField nu(grid);
  for (int j = 0; j < g.n_theta(); ++j) {
    const std::size_t k = g.index(0, j);
    const double n = std::hypot(g.rho_x()[k], g.rho_y()[k]);
    nu.x[k] = -g.rho_x()[k] / n;
    nu.y[k] = -g.rho_y()[k] / n;
  }
  return nu;
}

/// v·ν sampled on the inner boundary ring.
inline std::vector<double> boundary_normal_component(const VectorField& v) {
  const Grid& g = v.grid();
  std::vector<double> out(g.n_theta());
  for (int j = 0; j < g.n_theta(); ++j) {
    const std::size_t k = g.index(0, j);
    const double n = std::hypot(g.rho_x()[k], g.rho_y()[k]);
    out[j] = -(v.x[k] * g.rho_x()[k] + v.y[k] * g.rho_y()[k]) / n;
  }
  return out;
}

/// T f = b·∇f
inline ScalarField apply_tangential(const TangentialFrame& frame, const ScalarField& f) {
  auto g = grad(f);
  return frame.b.x * g.x + frame.b.y * g.y;
}

inline VectorField apply_tangential(const TangentialFrame& frame, const VectorField& v) {
  return {apply_tangential(frame, v.x), apply_tangential(frame, v.y)};
}

inline ScalarField apply_tangential_power(const TangentialFrame& frame, ScalarField f, int k) {
  for (int n = 0; n < k; ++n) f = apply_tangential(frame, f);
  return f;
}

inline VectorField apply_tangential_power(const TangentialFrame& frame, VectorField v, int k) {
  for (int n = 0; n < k; ++n) v = apply_tangential(frame, v);
  return v;
}

/// (c·∇)f for a first-order operator with coefficient field c.
inline ScalarField apply_first_order(const VectorField& c, const ScalarField& f) {
  auto g = grad(f);
  return c.x * g.x + c.y * g.y;
}

/// Coefficients of (ad T)^m(∂_s) = Σ c_i ∂_i for m = 0..k, using
/// [b·∇, c·∇] = ((b·∇)c − (c·∇)b)·∇.
inline std::vector<VectorField> ad_coefficients(const TangentialFrame& frame, Axis axis, int k) {
  const GridPtr& grid = frame.grid_ptr();
  std::vector<VectorField> out;
  VectorField c(grid);
  ScalarField one(grid, 1.0);
  (axis == Axis::x1 ? c.x : c.y) = one;
  out.push_back(c);
  const VectorField db_x = grad(frame.b.x);  // ∇b₁
  const VectorField db_y = grad(frame.b.y);  // ∇b₂
  for (int m = 1; m <= k; ++m) {
    const VectorField& prev = out.back();
    VectorField next(grid);
    if (m == 1) {
      // (b·∇)e_s vanishes identically.
      next.x = -(axis == Axis::x1 ? db_x.x : db_x.y);
      next.y = -(axis == Axis::x1 ? db_y.x : db_y.y);
    } else {
      next.x = apply_first_order(frame.b, prev.x) - (prev.x * db_x.x + prev.y * db_x.y);
      next.y = apply_first_order(frame.b, prev.y) - (prev.x * db_y.x + prev.y * db_y.y);
    }
    out.push_back(std::move(next));
  }
  return out;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// [T^k, ∂_s] f by composing the operators both ways.
inline ScalarField commutator_direct(const TangentialFrame& frame, const ScalarField& f, int k, Axis axis) {
  require(k >= 0 && k <= 4, ErrorKind::parameter, "commutator order must be in [0, 4]");
  ScalarField a = apply_tangential_power(frame, apply_partial(f, axis), k);
  ScalarField b = apply_partial(apply_tangential_power(frame, f, k), axis);
  return a - b;
}

/// [T^k, ∂_s] f = Σ_{m=1}^k C(k,m) ((ad T)^m ∂_s) T^{k−m} f.
inline ScalarField commutator_leibniz(const TangentialFrame& frame, const ScalarField& f, int k, Axis axis) {
  require(k >= 0 && k <= 4, ErrorKind::parameter, "commutator order must be in [0, 4]");
  ScalarField out(f.grid_ptr());
  if (k == 0) return out;
  const auto coeffs = ad_coefficients(frame, axis, k);
  std::vector<ScalarField> tpow{f};
  for (int n = 1; n < k; ++n) tpow.push_back(apply_tangential(frame, tpow.back()));
  for (int m = 1; m <= k; ++m) out.axpy(binomial(k, m), apply_first_order(coeffs[m], tpow[k - m]));
  return out;
}

/// [T^k, div] v, both routes.
inline ScalarField commutator_div_direct(const TangentialFrame& frame, const VectorField& v, int k) {
  return apply_tangential_power(frame, div(v), k) - div(apply_tangential_power(frame, v, k));
}
inline ScalarField commutator_div_leibniz(const TangentialFrame& frame, const VectorField& v, int k) {
  return commutator_leibniz(frame, v.x, k, Axis::x1) + commutator_leibniz(frame, v.y, k, Axis::x2);
}

/// [T^k, curl] v, both routes.
inline ScalarField commutator_curl_direct(const TangentialFrame& frame, const VectorField& v, int k) {
  return apply_tangential_power(frame, curl2d(v), k) - curl2d(apply_tangential_power(frame, v, k));
}
inline ScalarField commutator_curl_leibniz(const TangentialFrame& frame, const VectorField& v, int k) {
  return commutator_leibniz(frame, v.y, k, Axis::x1) - commutator_leibniz(frame, v.x, k, Axis::x2);
}

/// All components of the symmetric derivative tensor ∂ₓʲ f, indexed by the
/// number a of ∂₁ factors (component a is ∂₁^a ∂₂^{j−a} f).
inline std::vector<std::vector<ScalarField>> spatial_tensors(const ScalarField& f, int j_max) {
  std::vector<std::vector<ScalarField>> levels;
  levels.push_back({f});
  for (int j = 1; j <= j_max; ++j) {
    const auto& prev = levels.back();
    std::vector<ScalarField> next(j + 1);
    for (int a = 0; a < j; ++a) {
      auto g = grad(prev[a]);
      next[a] = std::move(g.y);
      if (a == j - 1) next[j] = std::move(g.x);
    }
    levels.push_back(std::move(next));
  }
  return levels;
}

/// Tensor multiplicities C(j, a) so that the Euclidean norm of the full
/// (non-symmetrized) tensor is recovered from the unique components.
inline std::vector<double> tensor_multiplicity(int j) {
  std::vector<double> m(j + 1);
  for (int a = 0; a <= j; ++a) m[a] = binomial(j, a);
  return m;
}

/// [∂^α, T] f with α = (a, j−a): direct route and the product-rule route
/// Σ_{β<α} C(α,β) ∂^{α−β}b·∇∂^β f.
inline ScalarField commutator_partial_direct(const TangentialFrame& frame, const ScalarField& f, int j, int a) {
  auto dt = spatial_tensors(apply_tangential(frame, f), j);
  auto df = spatial_tensors(f, j);
  return dt[j][a] - apply_tangential(frame, df[j][a]);
}

inline ScalarField commutator_partial_leibniz(const TangentialFrame& frame, const ScalarField& f, int j, int a) {
  auto db1 = spatial_tensors(frame.b.x, j);
  auto db2 = spatial_tensors(frame.b.y, j);
  auto df = spatial_tensors(f, j);
  ScalarField out(f.grid_ptr());
  const int b_total = j - a;
  for (int p = 0; p <= a; ++p) {
    for (int q = 0; q <= b_total; ++q) {
      if (p == a && q == b_total) continue;
      const int order = (a - p) + (b_total - q);
      const int c1 = a - p;
      const double w = binomial(a, p) * binomial(b_total, q);
      // β = (p, q): ∂^β f at level p+q, ∂₁∂^β f and ∂₂∂^β f at level p+q+1
      const ScalarField& f1 = df[p + q + 1][p + 1];
      const ScalarField& f2 = df[p + q + 1][p];
      ScalarField term = db1[order][c1] * f1 + db2[order][c1] * f2;
      out.axpy(w, term);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Derivative stacks ∂ₓʲ Tᵏ (ε∂ₜ)ⁱ u
// ---------------------------------------------------------------------------

struct StackIndex {
  int j = 0;
  int k = 0;
  int i = 0;
  auto operator<=>(const StackIndex&) const = default;
};

struct StackCaps {
  int n_max = 8;  // cap on j + k + i
  int k_max = 8;
  int i_max = 4;
};

struct StackEntry {
  std::vector<ScalarField> comps;  // base component × tensor component
  std::vector<double> multiplicity;

  double l2() const { return l2_norm(comps, multiplicity); }
};

using L2Table = std::map<StackIndex, double>;

/// Immutable table of derivative fields. Entry (0,0,0) is the base field.
class DerivativeStack {
 public:
  DerivativeStack(StackCaps caps, double eps) : caps_(caps), eps_(eps) {}

  const StackCaps& caps() const { return caps_; }
  double eps() const { return eps_; }
  bool contains(StackIndex idx) const { return entries_.count(idx) != 0; }
  const StackEntry& at(StackIndex idx) const {
    auto it = entries_.find(idx);
    if (it == entries_.end())
      fail(ErrorKind::stack, "missing entry (" + std::to_string(idx.j) + "," + std::to_string(idx.k) + "," +
                                 std::to_string(idx.i) + ")");
    return it->second;
  }
  const std::map<StackIndex, StackEntry>& entries() const { return entries_; }
  void insert(StackIndex idx, StackEntry e) { entries_[idx] = std::move(e); }

  L2Table l2_table() const {
    L2Table t;
    for (const auto& [idx, e] : entries_) t[idx] = e.l2();
    return t;
  }

 private:
  StackCaps caps_;
  double eps_;
  std::map<StackIndex, StackEntry> entries_;
};

/// Stored time levels t_c + (m − center)·dt of a multi-component field.
struct TimeHistory {
  double dt = 0.0;
  int center = 0;
  std::vector<std::vector<ScalarField>> levels;
};

/// Centered fourth-order finite differences in time. Returns td[i][c] =
/// ∂ₜⁱ of component c at the center level, i = 0..i_max.
inline std::vector<std::vector<ScalarField>> time_derivatives_fd(const TimeHistory& h, int i_max) {
  require(!h.levels.empty(), ErrorKind::stack, "empty time history");
  std::vector<std::vector<ScalarField>> td;
  td.push_back(h.levels.at(h.center));
  const int ncomp = static_cast<int>(h.levels[h.center].size());
  for (int i = 1; i <= i_max; ++i) {
    const int half = i <= 2 ? 2 : 3;
    std::string missing;
    for (int m = -half; m <= half; ++m) {
      const int lvl = h.center + m;
      if (lvl < 0 || lvl >= static_cast<int>(h.levels.size()))
        missing += (missing.empty() ? "" : ", ") + std::to_string(m);
    }
    if (!missing.empty())
      fail(ErrorKind::stack, "order " + std::to_string(i) + " time derivative needs levels at offsets {" +
                                 missing + "} (in units of dt)");
    require(h.dt > 0.0, ErrorKind::stack, "time history spacing must be positive");
    std::vector<double> offs;
    for (int m = -half; m <= half; ++m) offs.push_back(m * h.dt);
    const auto w = fd_weights(0.0, offs, i);
    std::vector<ScalarField> comps;
    for (int c = 0; c < ncomp; ++c) {
      ScalarField acc(h.levels[h.center][c].grid_ptr());
      for (int m = -half; m <= half; ++m) acc.axpy(w[m + half], h.levels[h.center + m][c]);
      comps.push_back(std::move(acc));
    }
    td.push_back(std::move(comps));
  }
  return td;
}

/// Visits every (j,k,i) with j+k+i ≤ n_max, k ≤ k_max, i ≤ i_max. The
/// visitor receives the entry components for all base components.
/// `td[i][c]` holds ∂ₜⁱ of base component c (unscaled); a null frame forces k = 0.
template <class Visitor>
void for_each_stack_entry(const std::vector<std::vector<ScalarField>>& td, const TangentialFrame* frame,
                          StackCaps caps, double eps, Visitor&& visit) {
  const int i_cap = std::min<int>(caps.i_max, static_cast<int>(td.size()) - 1);
  const int k_cap = frame ? caps.k_max : 0;
  for (int i = 0; i <= i_cap; ++i) {
    const double scale = std::pow(eps, i);
    std::vector<ScalarField> tk;
    for (const auto& c : td[i]) tk.push_back(scale * c);
    for (int k = 0; k <= std::min(k_cap, caps.n_max - i); ++k) {
      if (k > 0)
        for (auto& c : tk) c = apply_tangential(*frame, c);
      const int j_cap = caps.n_max - i - k;
      std::vector<std::vector<std::vector<ScalarField>>> tens;
      for (const auto& c : tk) tens.push_back(spatial_tensors(c, j_cap));
      for (int j = 0; j <= j_cap; ++j) {
        StackEntry e;
        const auto mult = tensor_multiplicity(j);
        for (auto& t : tens) {
          for (int a = 0; a <= j; ++a) {
            e.comps.push_back(std::move(t[j][a]));
            e.multiplicity.push_back(mult[a]);
          }
        }
        visit(StackIndex{j, k, i}, e);
      }
    }
  }
}

inline DerivativeStack build_stack(const std::vector<std::vector<ScalarField>>& td, const TangentialFrame* frame,
                                   StackCaps caps, double eps) {
  require(!td.empty() && !td[0].empty(), ErrorKind::stack, "stack base is empty");
  DerivativeStack stack(caps, eps);
  for_each_stack_entry(td, frame, caps, eps, [&](StackIndex idx, StackEntry& e) { stack.insert(idx, std::move(e)); });
  return stack;
}

/// Stack built from a stored history with finite differences in time.
inline DerivativeStack build_stack(const TimeHistory& history, const TangentialFrame* frame, StackCaps caps,
                                   double eps) {
  return build_stack(time_derivatives_fd(history, caps.i_max), frame, caps, eps);
}

/// Only the L² norms of a stack; avoids holding every field in memory.
inline L2Table stack_l2_table(const std::vector<std::vector<ScalarField>>& td, const TangentialFrame* frame,
                              StackCaps caps, double eps) {
  L2Table t;
  for_each_stack_entry(td, frame, caps, eps, [&](StackIndex idx, const StackEntry& e) { t[idx] = e.l2(); });
  return t;
}

}  // namespace machlab

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "machlab/errors.hpp"
#include "machlab/field.hpp"
#include "machlab/fieldops.hpp"

namespace machlab {

struct SolverOptions {
  double tol = 1e-11;  // relative residual
  int restart = 40;
  int max_iter = 600;
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;         // relative
  double compat_defect = 0.0;    // Neumann problems: multiplier λ
};

using LinearMap = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Restarted GMRES with right preconditioning. Returns the solution and fills
/// `report`; throws a solver error when the tolerance is not met.
inline Eigen::VectorXd gmres(const LinearMap& apply_a, const LinearMap& apply_m, const Eigen::VectorXd& b,
                             Eigen::VectorXd x, const SolverOptions& opts, SolveReport& report) {
  const Eigen::Index n = b.size();
  const double bnorm = b.norm();
  report = {};
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(n);
  if (x.size() != n) x = Eigen::VectorXd::Zero(n);
  const int m = opts.restart;
  Eigen::VectorXd r(n), w(n), z(n);
  int total = 0;
  double rel = 0.0;
  while (true) {
    apply_a(x, w);
    r = b - w;
    double beta = r.norm();
    rel = beta / bnorm;
    if (rel <= opts.tol || total >= opts.max_iter) break;
    std::vector<Eigen::VectorXd> v;
    v.reserve(m + 1);
    v.push_back(r / beta);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
    std::vector<double> cs(m), sn(m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
    g(0) = beta;
    int k = 0;
    for (; k < m && total < opts.max_iter; ++k, ++total) {
      apply_m(v[k], z);
      apply_a(z, w);
      for (int i = 0; i <= k; ++i) {
        h(i, k) = w.dot(v[i]);
        w -= h(i, k) * v[i];
      }
      for (int i = 0; i <= k; ++i) {  // second Gram-Schmidt pass
        const double c = w.dot(v[i]);
        h(i, k) += c;
        w -= c * v[i];
      }
      h(k + 1, k) = w.norm();
      v.push_back(h(k + 1, k) > 0.0 ? Eigen::VectorXd(w / h(k + 1, k)) : Eigen::VectorXd(w));
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
        h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
        h(i, k) = t;
      }
      const double den = std::hypot(h(k, k), h(k + 1, k));
      cs[k] = den > 0.0 ? h(k, k) / den : 1.0;
      sn[k] = den > 0.0 ? h(k + 1, k) / den : 0.0;
      h(k, k) = den;
      h(k + 1, k) = 0.0;
      g(k + 1) = -sn[k] * g(k);
      g(k) = cs[k] * g(k);
      if (std::abs(g(k + 1)) / bnorm <= 0.1 * opts.tol) {
        ++k;
        ++total;
        break;
      }
    }
    const Eigen::VectorXd y =
        h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    Eigen::VectorXd upd = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < k; ++i) upd += y(i) * v[i];
    apply_m(upd, z);
    x += z;
  }
  report.iterations = total;
  report.residual = rel;
  if (!(rel <= opts.tol))
    fail(ErrorKind::solver, "GMRES did not converge: relative residual " + std::to_string(rel) + " after " +
                                std::to_string(total) + " iterations (tolerance " + std::to_string(opts.tol) + ")");
  return x;
}

namespace detail {

inline std::vector<double> ring_mean(const std::vector<double>& a, const Grid& g) {
  std::vector<double> m(g.n_r(), 0.0);
  for (int i = 0; i < g.n_r(); ++i) {
    double s = 0.0;
    for (int j = 0; j < g.n_theta(); ++j) s += a[g.index(i, j)];
    m[i] = s / g.n_theta();
  }
  return m;
}

inline std::vector<double> ring_mean(std::span<const double> a, const Grid& g) {
  return ring_mean(std::vector<double>(a.begin(), a.end()), g);
}

/// Adds `scale · D` (a radial operator) to row `row` of a triplet list.
inline void add_radial_row(std::vector<Eigen::Triplet<double>>& t, const RadialOperator& d, int row, double scale,
                           int offset = 0) {
  if (scale == 0.0) return;
  const auto& w = d.weights(row);
  for (std::size_t k = 0; k < w.size(); ++k)
    t.emplace_back(row + offset, d.start(row) + static_cast<int>(k) + offset, scale * w[k]);
}

}  // namespace detail

/// Preconditioner built from θ-averaged coefficients: each Fourier mode m
/// gives an independent radial system that is factored once.
class ModePreconditioner {
 public:
  using cplx = std::complex<double>;
  using Matrix = Eigen::SparseMatrix<double>;

  /// `row_builder(m, triplets)` fills the radial matrix for mode m (size
  /// n_r, or n_r+1 when `bordered` and m == 0).
  template <class RowBuilder>
  ModePreconditioner(GridPtr grid, RowBuilder&& row_builder, bool bordered) : grid_(std::move(grid)), bordered_(bordered) {
    const int nm = grid_->n_theta() / 2 + 1;
    lu_.resize(nm);
    for (int m = 0; m < nm; ++m) {
      const int size = grid_->n_r() + ((bordered_ && m == 0) ? 1 : 0);
      std::vector<Eigen::Triplet<double>> t;
      row_builder(m, t);
      Matrix a(size, size);
      a.setFromTriplets(t.begin(), t.end());
      a.makeCompressed();
      lu_[m] = std::make_unique<Eigen::SparseLU<Matrix>>();
      lu_[m]->compute(a);
      require(lu_[m]->info() == Eigen::Success, ErrorKind::solver,
              "mode preconditioner factorization failed at mode " + std::to_string(m));
    }
  }

  /// Applies the approximate inverse to `in` (grid-sized, plus a trailing
  /// multiplier entry when bordered).
  void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
    const Grid& g = *grid_;
    const int nr = g.n_r(), nt = g.n_theta(), nm = nt / 2 + 1;
    std::vector<cplx> spec(static_cast<std::size_t>(nr) * nm);
    g.fft().forward(std::span<const double>(in.data(), g.size()), spec);
    Eigen::MatrixXd rhs(nr + 1, 2);
    for (int m = 0; m < nm; ++m) {
      const int size = nr + ((bordered_ && m == 0) ? 1 : 0);
      rhs.setZero();
      for (int i = 0; i < nr; ++i) {
        rhs(i, 0) = spec[static_cast<std::size_t>(i) * nm + m].real();
        rhs(i, 1) = spec[static_cast<std::size_t>(i) * nm + m].imag();
      }
      if (size > nr) rhs(nr, 0) = in(static_cast<Eigen::Index>(g.size()));
      Eigen::MatrixXd sol = lu_[m]->solve(rhs.topRows(size));
      for (int i = 0; i < nr; ++i) spec[static_cast<std::size_t>(i) * nm + m] = cplx(sol(i, 0), sol(i, 1));
      if (size > nr) lambda_ = sol(nr, 0);
    }
    out.resize(in.size());
    g.fft().backward(spec, std::span<double>(out.data(), g.size()));
    if (bordered_) out(static_cast<Eigen::Index>(g.size())) = lambda_;
  }

 private:
  GridPtr grid_;
  bool bordered_;
  std::vector<std::unique_ptr<Eigen::SparseLU<Matrix>>> lu_;
  mutable double lambda_ = 0.0;
};

/// (−Δ + 1)ψ = f with Dirichlet data on both rings.
class HelmholtzDirichletSolver {
 public:
  explicit HelmholtzDirichletSolver(GridPtr grid, SolverOptions opts = {}) : grid_(std::move(grid)), opts_(opts) {
    const Grid& g = *grid_;
    const auto grr = detail::ring_mean(g.g_rr(), g);
    const auto gtt = detail::ring_mean(g.g_tt(), g);
    const auto lr = detail::ring_mean(g.lap_rho(), g);
    const int nr = g.n_r();
    pre_ = std::make_unique<ModePreconditioner>(
        grid_,
        [&](int m, std::vector<Eigen::Triplet<double>>& t) {
          t.emplace_back(0, 0, 1.0);
          t.emplace_back(nr - 1, nr - 1, 1.0);
          for (int i = 1; i < nr - 1; ++i) {
            detail::add_radial_row(t, g.d_rho2(), i, -grr[i]);
            detail::add_radial_row(t, g.d_rho(), i, -lr[i]);
            t.emplace_back(i, i, 1.0 + m * m * gtt[i]);
          }
        },
        false);
  }

  /// Interior rows of `f` are the source; ring rows of `boundary` (if given)
  /// are the Dirichlet values, otherwise zero.
  ScalarField solve(const ScalarField& f, const ScalarField* boundary = nullptr, SolveReport* report = nullptr) const {
    const Grid& g = *grid_;
    const int nt = g.n_theta(), nr = g.n_r();
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(f.data().data(), g.size());
    for (int j = 0; j < nt; ++j) {
      b(g.index(0, j)) = boundary ? boundary->at(0, j) : 0.0;
      b(g.index(nr - 1, j)) = boundary ? boundary->at(nr - 1, j) : 0.0;
    }
    SolveReport rep;
    Eigen::VectorXd x = gmres([&](const Eigen::VectorXd& in, Eigen::VectorXd& out) { apply(in, out); },
                              [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) { pre_->apply(in, out); }, b,
                              Eigen::VectorXd(), opts_, rep);
    if (report) *report = rep;
    ScalarField out(grid_);
    Eigen::Map<Eigen::VectorXd>(out.data().data(), g.size()) = x;
    for (int j = 0; j < nt; ++j) {
      out.at(0, j) = b(g.index(0, j));
      out.at(nr - 1, j) = b(g.index(nr - 1, j));
    }
    return out;
  }

  void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
    const Grid& g = *grid_;
    ScalarField u(grid_);
    Eigen::Map<Eigen::VectorXd>(u.data().data(), g.size()) = in;
    ScalarField lap = laplacian(u);
    out.resize(in.size());
    for (std::size_t k = 0; k < g.size(); ++k) out(k) = u[k] - lap[k];
    const int nr = g.n_r();
    for (int j = 0; j < g.n_theta(); ++j) {
      out(g.index(0, j)) = u.at(0, j);
      out(g.index(nr - 1, j)) = u.at(nr - 1, j);
    }
  }

 private:
  GridPtr grid_;
  SolverOptions opts_;
  std::unique_ptr<ModePreconditioner> pre_;
};

/// Unit vector ∇ρ/|∇ρ| on every node (into the fluid on the inner ring,
/// outward on the outer ring).
inline VectorField rho_direction(const GridPtr& grid) {
  const Grid& g = *grid;
  VectorField n(grid);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double s = std::hypot(g.rho_x()[k], g.rho_y()[k]);
    n.x[k] = g.rho_x()[k] / s;
    n.y[k] = g.rho_y()[k] / s;
  }
  return n;
}

/// ∇·(β∇q) = f with β ∇q·n̂ = g on both rings, n̂ = ∇ρ/|∇ρ|. The interior
/// equation carries an extra unknown constant λ and q has zero mean, so the
/// bordered system is nonsingular; λ measures the discrete compatibility defect.
class WeightedNeumannSolver {
 public:
  WeightedNeumannSolver(GridPtr grid, const ScalarField& beta, SolverOptions opts = {})
      : grid_(std::move(grid)), opts_(opts), nhat_(rho_direction(grid_)) {
    const Grid& g = *grid_;
    set_beta(beta);
    mean_w_.assign(g.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) total += g.jacobian()[k];
    for (std::size_t k = 0; k < g.size(); ++k) mean_w_[k] = g.jacobian()[k] / total;

    const auto grr = detail::ring_mean(g.g_rr(), g);
    const auto gtt = detail::ring_mean(g.g_tt(), g);
    const auto lr = detail::ring_mean(g.lap_rho(), g);
    const auto bb = detail::ring_mean(beta_.values(), g);
    ScalarField gb_r(grid_);
    for (std::size_t k = 0; k < g.size(); ++k)
      gb_r[k] = grad_beta_.x[k] * g.rho_x()[k] + grad_beta_.y[k] * g.rho_y()[k];
    const auto gbr = detail::ring_mean(gb_r.values(), g);
    ScalarField nrm(grid_);
    for (std::size_t k = 0; k < g.size(); ++k) nrm[k] = std::hypot(g.rho_x()[k], g.rho_y()[k]);
    const auto nr_mean = detail::ring_mean(nrm.values(), g);
    const auto mw = detail::ring_mean(mean_w_, g);
    const int nr = g.n_r(), nt = g.n_theta();
    pre_ = std::make_unique<ModePreconditioner>(
        grid_,
        [&](int m, std::vector<Eigen::Triplet<double>>& t) {
          for (int i : {0, nr - 1}) detail::add_radial_row(t, g.d_rho(), i, bb[i] * nr_mean[i]);
          for (int i = 1; i < nr - 1; ++i) {
            detail::add_radial_row(t, g.d_rho2(), i, bb[i] * grr[i]);
            detail::add_radial_row(t, g.d_rho(), i, bb[i] * lr[i] + gbr[i]);
            t.emplace_back(i, i, -bb[i] * m * m * gtt[i]);
          }
          if (m == 0) {
            // λ column: unnormalized mode-0 coefficient of the constant 1 is n_θ.
            for (int i = 1; i < nr - 1; ++i) t.emplace_back(i, nr, static_cast<double>(nt));
            // constraint Σ w q = Σ_i w̄_i q̂₀(i)
            for (int i = 0; i < nr; ++i) t.emplace_back(nr, i, mw[i]);
          }
        },
        true);
  }

  /// Replaces the coefficient while keeping the preconditioner.
  void set_beta(const ScalarField& beta) {
    beta_ = beta;
    grad_beta_ = grad(beta_);
  }
  const ScalarField& beta() const { return beta_; }

  /// `g_inner`, `g_outer` are the ring values of β∇q·n̂.
  ScalarField solve(const ScalarField& f, std::span<const double> g_inner, std::span<const double> g_outer,
                    SolveReport* report = nullptr, const ScalarField* guess = nullptr) const {
    const Grid& g = *grid_;
    const int nt = g.n_theta(), nr = g.n_r();
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::VectorXd b(n + 1);
    for (Eigen::Index k = 0; k < n; ++k) b(k) = f[k];
    for (int j = 0; j < nt; ++j) {
      b(g.index(0, j)) = g_inner.empty() ? 0.0 : g_inner[j];
      b(g.index(nr - 1, j)) = g_outer.empty() ? 0.0 : g_outer[j];
    }
    b(n) = 0.0;
    Eigen::VectorXd x0;
    if (guess) {
      x0 = Eigen::VectorXd::Zero(n + 1);
      for (Eigen::Index k = 0; k < n; ++k) x0(k) = (*guess)[k];
    }
    SolveReport rep;
    Eigen::VectorXd x = gmres([&](const Eigen::VectorXd& in, Eigen::VectorXd& out) { apply(in, out); },
                              [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) { pre_->apply(in, out); }, b,
                              x0, opts_, rep);
    rep.compat_defect = x(n);
    if (report) *report = rep;
    ScalarField out(grid_);
    for (Eigen::Index k = 0; k < n; ++k) out[k] = x(k);
    return out;
  }

  void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
    const Grid& g = *grid_;
    const auto n = static_cast<Eigen::Index>(g.size());
    ScalarField q(grid_);
    for (Eigen::Index k = 0; k < n; ++k) q[k] = in(k);
    const double lambda = in(n);
    const VectorField gq = grad(q);
    out.resize(n + 1);
    double mean = 0.0;
    const ScalarField lap = laplacian(q);
    for (Eigen::Index k = 0; k < n; ++k)
      out(k) = beta_[k] * lap[k] + grad_beta_.x[k] * gq.x[k] + grad_beta_.y[k] * gq.y[k] + lambda;
    for (Eigen::Index k = 0; k < n; ++k) mean += mean_w_[k] * q[k];
    const int nr = g.n_r();
    for (int i : {0, nr - 1}) {
      for (int j = 0; j < g.n_theta(); ++j) {
        const std::size_t k = g.index(i, j);
        out(k) = beta_[k] * (gq.x[k] * nhat_.x[k] + gq.y[k] * nhat_.y[k]);
      }
    }
    out(n) = mean;
  }

 private:
  GridPtr grid_;
  SolverOptions opts_;
  VectorField nhat_;
  ScalarField beta_;
  VectorField grad_beta_;
  std::vector<double> mean_w_;
  std::unique_ptr<ModePreconditioner> pre_;
};

inline ScalarField solve_dirichlet_helmholtz(const ScalarField& f, const ScalarField* boundary = nullptr,
                                             SolveReport* report = nullptr) {
  return HelmholtzDirichletSolver(f.grid_ptr()).solve(f, boundary, report);
}

}  // namespace machlab

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "machlab/grid.hpp"

namespace machlab {

/// Samples of a scalar function on every grid node.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(GridPtr grid, double fill = 0.0) : grid_(std::move(grid)), v_(grid_->size(), fill) {}

  template <class F>
  static ScalarField from_function(GridPtr grid, F&& f) {
    ScalarField out(grid);
    const auto& x = grid->x();
    const auto& y = grid->y();
    for (std::size_t k = 0; k < out.size(); ++k) out.v_[k] = f(x[k], y[k]);
    return out;
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  bool empty() const { return v_.empty(); }
  std::size_t size() const { return v_.size(); }

  double& operator[](std::size_t k) { return v_[k]; }
  double operator[](std::size_t k) const { return v_[k]; }
  double& at(int i, int j) { return v_[grid_->index(i, j)]; }
  double at(int i, int j) const { return v_[grid_->index(i, j)]; }

  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }
  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }

  ScalarField& operator+=(const ScalarField& o) {
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
    return *this;
  }
  ScalarField& operator*=(const ScalarField& o) {
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] *= o.v_[k];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (auto& x : v_) x *= s;
    return *this;
  }
  /// this += s * o
  ScalarField& axpy(double s, const ScalarField& o) {
    for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += s * o.v_[k];
    return *this;
  }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(ScalarField a, const ScalarField& b) { return a *= b; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
  friend ScalarField operator-(ScalarField a) { return a *= -1.0; }

  template <class F>
  ScalarField map(F&& f) const {
    ScalarField out(*this);
    for (auto& x : out.v_) x = f(x);
    return out;
  }

  bool all_finite() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
  }

 private:
  GridPtr grid_;
  std::vector<double> v_;
};

/// Two Cartesian components stored on the polar grid.
struct VectorField {
  ScalarField x;
  ScalarField y;

  VectorField() = default;
  explicit VectorField(const GridPtr& grid) : x(grid), y(grid) {}
  VectorField(ScalarField a, ScalarField b) : x(std::move(a)), y(std::move(b)) {}

  template <class F>
  static VectorField from_function(const GridPtr& grid, F&& f) {
    VectorField out(grid);
    const auto& gx = grid->x();
    const auto& gy = grid->y();
    for (std::size_t k = 0; k < out.x.size(); ++k) {
      const Vec2 v = f(gx[k], gy[k]);
      out.x[k] = v.x;
      out.y[k] = v.y;
    }
    return out;
  }

  const Grid& grid() const { return x.grid(); }
  const GridPtr& grid_ptr() const { return x.grid_ptr(); }

  VectorField& operator+=(const VectorField& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  VectorField& operator-=(const VectorField& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  VectorField& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  VectorField& axpy(double s, const VectorField& o) {
    x.axpy(s, o.x);
    y.axpy(s, o.y);
    return *this;
  }
  friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
  friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
  friend VectorField operator*(double s, VectorField a) { return a *= s; }

  bool all_finite() const { return x.all_finite() && y.all_finite(); }
};

inline ScalarField dot(const VectorField& a, const VectorField& b) { return a.x * b.x + a.y * b.y; }

/// L² norm over the non-sponge region.
inline double l2_norm(const ScalarField& f) {
  const auto& w = f.grid().quadrature();
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += w[k] * f[k] * f[k];
  return std::sqrt(s);
}

inline double l2_norm(const VectorField& v) {
  const double a = l2_norm(v.x), b = l2_norm(v.y);
  return std::sqrt(a * a + b * b);
}

/// Root of the sum of squared L² norms of a list of components.
inline double l2_norm(std::span<const ScalarField> comps, std::span<const double> multiplicity = {}) {
  double s = 0.0;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const double n = l2_norm(comps[c]);
    s += (multiplicity.empty() ? 1.0 : multiplicity[c]) * n * n;
  }
  return std::sqrt(s);
}

inline double integrate(const ScalarField& f) {
  const auto& w = f.grid().quadrature();
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += w[k] * f[k];
  return s;
}

/// Max |f| over radial rows [i0, i1].
inline double max_abs_rows(const ScalarField& f, int i0, int i1) {
  const Grid& g = f.grid();
  double m = 0.0;
  for (int i = std::max(i0, 0); i <= std::min(i1, g.n_r() - 1); ++i)
    for (int j = 0; j < g.n_theta(); ++j) m = std::max(m, std::abs(f.at(i, j)));
  return m;
}

inline double max_abs(const ScalarField& f) { return max_abs_rows(f, 0, f.grid().n_r() - 1); }

/// Max |f| over nodes where `mask` is nonzero.
inline double max_abs_masked(const ScalarField& f, const std::vector<char>& mask) {
  double m = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k)
    if (mask[k]) m = std::max(m, std::abs(f[k]));
  return m;
}

inline double min_value(const ScalarField& f) { return *std::min_element(f.data().begin(), f.data().end()); }
inline double max_value(const ScalarField& f) { return *std::max_element(f.data().begin(), f.data().end()); }

}  // namespace machlab

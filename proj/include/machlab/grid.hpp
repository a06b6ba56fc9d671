#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "machlab/config.hpp"
#include "machlab/errors.hpp"
#include "machlab/stencil.hpp"

namespace machlab {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct FourierMode {
  int k = 0;
  double cos_amp = 0.0;
  double sin_amp = 0.0;
};

/// Inner boundary r = R(θ) = 1 + Σ a_k cos kθ + b_k sin kθ (star-shaped about
/// the origin). An empty mode list is the unit circle.
class BoundaryCurve {
 public:
  BoundaryCurve() = default;
  explicit BoundaryCurve(std::vector<FourierMode> modes) : modes_(std::move(modes)) {}

  bool circular() const {
    return std::all_of(modes_.begin(), modes_.end(),
                       [](const FourierMode& m) { return m.cos_amp == 0.0 && m.sin_amp == 0.0; });
  }
  const std::vector<FourierMode>& modes() const { return modes_; }
  int max_mode() const {
    int k = 0;
    for (const auto& m : modes_) k = std::max(k, m.k);
    return k;
  }

  /// Derivative of R of order 0..3.
  double radius(double theta, int deriv = 0) const {
    double r = deriv == 0 ? 1.0 : 0.0;
    for (const auto& m : modes_) {
      const double kt = m.k * theta;
      const double c = std::cos(kt);
      const double s = std::sin(kt);
      const double kp = std::pow(static_cast<double>(m.k), deriv);
      switch (deriv % 4) {
        case 0: r += kp * (m.cos_amp * c + m.sin_amp * s); break;
        case 1: r += kp * (-m.cos_amp * s + m.sin_amp * c); break;
        case 2: r += kp * (-m.cos_amp * c - m.sin_amp * s); break;
        case 3: r += kp * (m.cos_amp * s - m.sin_amp * c); break;
      }
    }
    return r;
  }

  Vec2 point(double t) const {
    const double r = radius(t);
    return {r * std::cos(t), r * std::sin(t)};
  }
  Vec2 tangent(double t) const {
    const double r = radius(t), r1 = radius(t, 1);
    const double c = std::cos(t), s = std::sin(t);
    return {r1 * c - r * s, r1 * s + r * c};
  }
  Vec2 second(double t) const {
    const double r = radius(t), r1 = radius(t, 1), r2 = radius(t, 2);
    const double c = std::cos(t), s = std::sin(t);
    return {r2 * c - 2.0 * r1 * s - r * c, r2 * s + 2.0 * r1 * c - r * s};
  }

  /// Unit normal pointing out of the body (into the fluid).
  Vec2 outward_normal(double t) const {
    const Vec2 tg = tangent(t);
    const double n = std::hypot(tg.x, tg.y);
    return {tg.y / n, -tg.x / n};
  }

  double min_radius(int samples = 4096) const {
    double m = radius(0.0);
    for (int i = 1; i < samples; ++i) m = std::min(m, radius(kTwoPi * i / samples));
    return m;
  }
  double max_radius(int samples = 4096) const {
    double m = radius(0.0);
    for (int i = 1; i < samples; ++i) m = std::max(m, radius(kTwoPi * i / samples));
    return m;
  }

  /// Parses `k:a:b` triples separated by commas or whitespace.
  static BoundaryCurve parse(const std::string& text) {
    std::vector<FourierMode> modes;
    for (const auto& tok : Config::split(text, ", \t;")) {
      auto parts = Config::split(tok, ":");
      if (parts.size() < 2 || parts.size() > 3)
        fail(ErrorKind::config, "perturb_coeffs: expected k:cos_amp[:sin_amp], got '" + tok + "'");
      try {
        FourierMode m;
        m.k = std::stoi(parts[0]);
        m.cos_amp = std::stod(parts[1]);
        m.sin_amp = parts.size() == 3 ? std::stod(parts[2]) : 0.0;
        if (m.k < 1) fail(ErrorKind::config, "perturb_coeffs: mode index must be >= 1");
        modes.push_back(m);
      } catch (const std::logic_error&) {
        fail(ErrorKind::config, "perturb_coeffs: malformed entry '" + tok + "'");
      }
    }
    return BoundaryCurve(std::move(modes));
  }

 private:
  std::vector<FourierMode> modes_;
};

/// Exterior of the body bounded by `boundary`, truncated at `r_outer`.
struct ExteriorDomain {
  BoundaryCurve boundary;
  double r_outer = 8.0;
  double collar_width = 0.5;
  double sponge_width = 2.0;

  bool circular() const { return boundary.circular(); }

  void validate() const {
    require(collar_width > 0.0, ErrorKind::parameter, "collar_width must be positive");
    require(sponge_width >= 0.0, ErrorKind::parameter, "sponge_width must be nonnegative");
    const double rmin = boundary.min_radius();
    require(rmin >= 0.5, ErrorKind::geometry,
            "boundary radius drops to " + std::to_string(rmin) + " < 0.5");
    const double rmax = boundary.max_radius();
    require(r_outer >= rmax + collar_width + sponge_width, ErrorKind::parameter,
            "r_outer must exceed max boundary radius + collar_width + sponge_width");
  }

  static ExteriorDomain from_config(const Config& cfg) {
    ExteriorDomain d;
    const std::string kind = cfg.get_string("geometry.boundary", "unit_circle");
    if (kind == "fourier_perturbed_circle") {
      d.boundary = BoundaryCurve::parse(cfg.get_string("geometry.perturb_coeffs", ""));
    } else if (kind != "unit_circle") {
      fail(ErrorKind::config, "unknown boundary kind '" + kind + "'");
    }
    d.r_outer = cfg.get_double("geometry.r_outer", d.r_outer);
    d.collar_width = cfg.get_double("geometry.collar_width", d.collar_width);
    d.sponge_width = cfg.get_double("geometry.sponge_width", d.sponge_width);
    d.validate();
    return d;
  }
};

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Batched real FFTs along θ for all rings of a field (row-major (r, θ)).
class ThetaFFT {
 public:
  using cplx = std::complex<double>;

  ThetaFFT(int n_rings, int n_theta) : rings_(n_rings), n_(n_theta), nc_(n_theta / 2 + 1) {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    double* in = fftw_alloc_real(static_cast<std::size_t>(rings_) * n_);
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(rings_) * nc_);
    int n = n_;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_many_dft_r2c(1, &n, rings_, in, nullptr, 1, n_, out, nullptr, 1, nc_, flags);
    bwd_ = fftw_plan_many_dft_c2r(1, &n, rings_, out, nullptr, 1, nc_, in, nullptr, 1, n_,
                                  flags | FFTW_DESTROY_INPUT);
    fftw_free(in);
    fftw_free(out);
  }
  ThetaFFT(const ThetaFFT&) = delete;
  ThetaFFT& operator=(const ThetaFFT&) = delete;
  ~ThetaFFT() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  int modes() const { return nc_; }

  /// Unnormalized forward transform; `out` has rings × (n/2+1) entries.
  void forward(std::span<const double> in, std::span<cplx> out) const {
    fftw_execute_dft_r2c(fwd_, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
  }

  /// Inverse transform including the 1/n normalization. Destroys `in`.
  void backward(std::span<cplx> in, std::span<double> out) const {
    fftw_execute_dft_c2r(bwd_, reinterpret_cast<fftw_complex*>(in.data()), out.data());
    const double s = 1.0 / n_;
    for (auto& v : out) v *= s;
  }

  /// Spectral θ-derivative of the given order. The Nyquist mode is dropped
  /// for odd orders.
  void derivative(std::span<const double> in, std::span<double> out, int order) const {
    std::vector<cplx> spec(static_cast<std::size_t>(rings_) * nc_);
    forward(in, spec);
    scale_modes(spec, order);
    backward(spec, out);
  }

  void scale_modes(std::span<cplx> spec, int order) const {
    std::vector<cplx> factor(nc_);
    for (int m = 0; m < nc_; ++m) {
      cplx f = std::pow(cplx(0.0, static_cast<double>(m)), order);
      if (order % 2 == 1 && 2 * m == n_) f = 0.0;
      factor[m] = f;
    }
    for (int i = 0; i < rings_; ++i)
      for (int m = 0; m < nc_; ++m) spec[static_cast<std::size_t>(i) * nc_ + m] *= factor[m];
  }

 private:
  int rings_;
  int n_;
  int nc_;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

/// Polar tensor grid fitted to the inner boundary: nodes (ρ_i, θ_j) with ρ
/// uniform on [1, r_outer] and physical radius r = R(θ) + (ρ-1)(r_outer - R(θ))/(r_outer - 1).
/// Fields are stored row-major in (ρ, θ).
class Grid {
 public:
  Grid(const ExteriorDomain& domain, int n_r, int n_theta)
      : domain_(domain), n_r_(n_r), n_theta_(n_theta) {
    domain_.validate();
    require(n_theta >= 8 && n_theta % 2 == 0, ErrorKind::parameter, "n_theta must be even and >= 8");
    require(n_r >= 16, ErrorKind::parameter, "n_r must be >= 16");
    rho_.resize(n_r_);
    for (int i = 0; i < n_r_; ++i) rho_[i] = 1.0 + (domain_.r_outer - 1.0) * i / (n_r_ - 1);
    theta_.resize(n_theta_);
    for (int j = 0; j < n_theta_; ++j) theta_[j] = kTwoPi * j / n_theta_;

    d1_ = RadialOperator(rho_, 1, kAccuracy);
    d2_ = RadialOperator(rho_, 2, kAccuracy);
    fft_ = std::make_unique<ThetaFFT>(n_r_, n_theta_);

    const std::size_t n = size();
    for (auto* a : {&x_, &y_, &r_, &rho_x_, &rho_y_, &th_x_, &th_y_, &g_rr_, &g_rt_, &g_tt_,
                    &lap_rho_, &jac_, &quad_})
      a->assign(n, 0.0);

    const double ro = domain_.r_outer;
    const double c = ro - 1.0;
    for (int j = 0; j < n_theta_; ++j) {
      const double t = theta_[j];
      const double R = domain_.boundary.radius(t);
      const double R1 = domain_.boundary.radius(t, 1);
      const double R2 = domain_.boundary.radius(t, 2);
      const double u = ro - R;
      const double s = u / c;
      const double ct = std::cos(t), st = std::sin(t);
      for (int i = 0; i < n_r_; ++i) {
        const std::size_t k = index(i, j);
        const double r = R + (rho_[i] - 1.0) * s;
        const double rho_r = 1.0 / s;
        const double rho_t = c * (r - ro) * R1 / (u * u);
        const double rho_tt = c * (r - ro) * (R2 / (u * u) + 2.0 * R1 * R1 / (u * u * u));
        x_[k] = r * ct;
        y_[k] = r * st;
        r_[k] = r;
        // ∇ρ = ρ_r e_r + (ρ_θ / r) e_θ, ∇θ = e_θ / r
        const double er = rho_r, et = rho_t / r;
        rho_x_[k] = er * ct - et * st;
        rho_y_[k] = er * st + et * ct;
        th_x_[k] = -st / r;
        th_y_[k] = ct / r;
        g_rr_[k] = er * er + et * et;
        g_rt_[k] = rho_t / (r * r);
        g_tt_[k] = 1.0 / (r * r);
        lap_rho_[k] = rho_r / r + rho_tt / (r * r);
        jac_[k] = r * s;
      }
    }

    sponge_start_ = n_r_ - 1;
    const double rho_s = domain_.r_outer - domain_.sponge_width;
    for (int i = 0; i < n_r_; ++i) {
      if (rho_[i] >= rho_s - 1e-12) {
        sponge_start_ = i;
        break;
      }
    }
    const double dtheta = kTwoPi / n_theta_;
    const double drho = rho_[1] - rho_[0];
    for (int i = 0; i <= sponge_start_; ++i) {
      const double wr = (i == 0 || i == sponge_start_) ? 0.5 * drho : drho;
      for (int j = 0; j < n_theta_; ++j) quad_[index(i, j)] = wr * dtheta * jac_[index(i, j)];
    }
  }

  Grid(const Grid&) = delete;
  Grid& operator=(const Grid&) = delete;

  static constexpr int kAccuracy = 6;

  const ExteriorDomain& domain() const { return domain_; }
  bool circular() const { return domain_.circular(); }
  int n_r() const { return n_r_; }
  int n_theta() const { return n_theta_; }
  std::size_t size() const { return static_cast<std::size_t>(n_r_) * n_theta_; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n_theta_ + j; }

  const std::vector<double>& rho() const { return rho_; }
  const std::vector<double>& theta() const { return theta_; }
  double drho() const { return rho_[1] - rho_[0]; }
  double dtheta() const { return kTwoPi / n_theta_; }
  /// Smallest physical node spacing (radial or arc length).
  double h_min() const {
    double h = 1e300;
    for (int j = 0; j < n_theta_; ++j) {
      const std::size_t k0 = index(0, j);
      h = std::min(h, drho() * jac_[k0] / r_[k0]);
      h = std::min(h, r_[k0] * dtheta());
    }
    return h;
  }

  int inner_index() const { return 0; }
  int outer_index() const { return n_r_ - 1; }
  int sponge_start_index() const { return sponge_start_; }

  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }
  const std::vector<double>& r() const { return r_; }
  const std::vector<double>& rho_x() const { return rho_x_; }
  const std::vector<double>& rho_y() const { return rho_y_; }
  const std::vector<double>& theta_x() const { return th_x_; }
  const std::vector<double>& theta_y() const { return th_y_; }
  const std::vector<double>& g_rr() const { return g_rr_; }
  const std::vector<double>& g_rt() const { return g_rt_; }
  const std::vector<double>& g_tt() const { return g_tt_; }
  const std::vector<double>& lap_rho() const { return lap_rho_; }
  /// Area element r·∂r/∂ρ so that dA = jac dρ dθ.
  const std::vector<double>& jacobian() const { return jac_; }
  /// Quadrature weights over the non-sponge region (trapezoid in ρ, uniform in θ).
  const std::vector<double>& quadrature() const { return quad_; }

  const RadialOperator& d_rho() const { return d1_; }
  const RadialOperator& d_rho2() const { return d2_; }
  const ThetaFFT& fft() const { return *fft_; }

  void apply_d_rho(std::span<const double> in, std::span<double> out) const {
    d1_.apply(in, out, n_theta_);
  }
  void apply_d_rho2(std::span<const double> in, std::span<double> out) const {
    d2_.apply(in, out, n_theta_);
  }
  void apply_d_theta(std::span<const double> in, std::span<double> out, int order = 1) const {
    fft_->derivative(in, out, order);
  }

 private:
  ExteriorDomain domain_;
  int n_r_;
  int n_theta_;
  std::vector<double> rho_, theta_;
  RadialOperator d1_, d2_;
  std::unique_ptr<ThetaFFT> fft_;
  std::vector<double> x_, y_, r_, rho_x_, rho_y_, th_x_, th_y_, g_rr_, g_rt_, g_tt_, lap_rho_,
      jac_, quad_;
  int sponge_start_ = 0;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(const ExteriorDomain& domain, int n_r, int n_theta) {
  return std::make_shared<const Grid>(domain, n_r, n_theta);
}

}  // namespace machlab

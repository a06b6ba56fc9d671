#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <fftw3.h>

#include "machlab/compressible.hpp"
#include "machlab/config.hpp"
#include "machlab/errors.hpp"
#include "machlab/fieldops.hpp"
#include "machlab/frame.hpp"
#include "machlab/incompressible.hpp"
#include "machlab/norms.hpp"

namespace machlab {

struct RunOptions {
  double t_end = 0.2;
  double output_every = 0.02;
  bool compute_norm = true;
  double level_spacing = 0.05;  // time-level spacing for ∂ₜ³, ∂ₜ⁴ in units of ε
  bool keep_states = true;
  NormParams norms{};

  static RunOptions from_config(const Config& cfg) {
    RunOptions o;
    o.t_end = cfg.get_double("t_end", o.t_end);
    o.output_every = cfg.get_double("output_every", o.output_every);
    o.compute_norm = cfg.get_bool("compute_norm", o.compute_norm);
    o.norms = NormParams::from_config(cfg);
    return o;
  }

  /// The norm horizon only matters when norms are logged (compressible runs).
  void validate(bool uses_norm = true) const {
    require(t_end > 0.0, ErrorKind::config, "t_end must be positive");
    require(output_every > 0.0 && output_every <= t_end, ErrorKind::config, "output_every must lie in (0, t_end]");
    norms.validate();
    if (uses_norm && compute_norm)
      require(t_end <= norms.horizon() * (1.0 + 1e-12), ErrorKind::config,
              "t_end exceeds the norm horizon tau0/(2K)");
  }

  /// Output times 0, Δ, 2Δ, … , t_end.
  std::vector<double> output_times() const {
    std::vector<double> t{0.0};
    const int n = static_cast<int>(std::floor(t_end / output_every + 1e-9));
    for (int k = 1; k <= n; ++k) t.push_back(k * output_every);
    if (t_end - t.back() > 1e-9 * t_end) t.push_back(t_end);
    return t;
  }
};

struct SeriesRow {
  double t = 0.0;
  double l2_p = 0.0;
  double l2_divv = 0.0;
  double normA = 0.0;
  double max_vnu = 0.0;
  double min_S = 0.0;
  double max_S = 0.0;
  double l2_pi = 0.0;  // incompressible runs only
};

struct CompressibleRun {
  double eps = 0.0;
  std::vector<SeriesRow> rows;
  std::vector<EulerState> states;  // at output times when kept
  int steps = 0;
  double max_vnu = 0.0;            // over every step
  double s_violation = 0.0;        // largest excursion of S outside its initial range
  double s_drift_rate = 0.0;       // s_violation / t_end

  double sup_normA() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.normA);
    return m;
  }
  double sup_divv() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.l2_divv);
    return m;
  }
};

struct IncompressibleRun {
  std::vector<SeriesRow> rows;
  std::vector<IncState> states;
  int steps = 0;
};

/// Truncated ‖S‖_A + ‖u‖_A at τ(t) with time derivatives from the solver.
inline double state_norm_A(const CompressibleSolver& solver, const EulerState& s, const TangentialFrame* frame,
                           const NormParams& p, double level_spacing) {
  const auto [tu, ts] = state_time_derivatives(solver, s, p.I_max, level_spacing * solver.eps());
  const double nu = norm_A(stack_l2_table(tu, frame, p.caps(), solver.eps()), p, s.t).total;
  const double ns = norm_A(stack_l2_table(ts, frame, p.caps(), solver.eps()), p, s.t).total;
  return nu + ns;
}

inline SeriesRow series_row(const CompressibleSolver& solver, const EulerState& s, const TangentialFrame* frame,
                            const RunOptions& o) {
  SeriesRow r;
  r.t = s.t;
  r.l2_p = l2_norm(s.p);
  r.l2_divv = l2_norm(div(s.v));
  r.normA = o.compute_norm ? state_norm_A(solver, s, frame, o.norms, o.level_spacing) : 0.0;
  r.max_vnu = solver.max_wall_normal_velocity(s);
  r.min_S = min_value(s.S);
  r.max_S = max_value(s.S);
  return r;
}

/// Integrates to t_end hitting every output time exactly. Rows are appended to
/// `run` as they are produced, so a blow-up leaves the partial series behind;
/// `last_good`, when given, holds the state before the step in progress.
inline void run_compressible_into(CompressibleRun& run, const CompressibleSolver& solver, EulerState s,
                                  const TangentialFrame* frame, const RunOptions& o, EulerState* last_good = nullptr) {
  o.validate();
  run.eps = solver.eps();
  const double s_min0 = min_value(s.S), s_max0 = max_value(s.S);
  const auto times = o.output_times();
  run.max_vnu = solver.max_wall_normal_velocity(s);
  run.rows.push_back(series_row(solver, s, frame, o));
  if (o.keep_states) run.states.push_back(s);
  for (std::size_t n = 1; n < times.size(); ++n) {
    while (s.t < times[n] - 1e-12 * std::max(1.0, times[n])) {
      if (last_good) *last_good = s;
      solver.step(s, std::min(solver.stable_dt(s), times[n] - s.t));
      ++run.steps;
      run.max_vnu = std::max(run.max_vnu, solver.max_wall_normal_velocity(s));
      run.s_violation = std::max({run.s_violation, max_value(s.S) - s_max0, s_min0 - min_value(s.S)});
    }
    s.t = times[n];
    run.rows.push_back(series_row(solver, s, frame, o));
    if (o.keep_states) run.states.push_back(s);
  }
  run.s_drift_rate = run.s_violation / o.t_end;
}

inline CompressibleRun run_compressible(const CompressibleSolver& solver, EulerState s, const TangentialFrame* frame,
                                        const RunOptions& o) {
  CompressibleRun run;
  run_compressible_into(run, solver, std::move(s), frame, o);
  return run;
}

inline SeriesRow series_row(const IncompressibleSolver& solver, const IncState& s) {
  SeriesRow r;
  r.t = s.t;
  r.l2_divv = l2_norm(div(s.v));
  r.max_vnu = solver.max_wall_normal_velocity(s);
  r.min_S = min_value(s.S);
  r.max_S = max_value(s.S);
  r.l2_pi = l2_norm(s.pi);
  return r;
}

inline void run_incompressible_into(IncompressibleRun& run, const IncompressibleSolver& solver, IncState s,
                                    const RunOptions& o, IncState* last_good = nullptr, IncState* final = nullptr) {
  o.validate(false);
  const auto times = o.output_times();
  run.rows.push_back(series_row(solver, s));
  if (o.keep_states) run.states.push_back(s);
  for (std::size_t n = 1; n < times.size(); ++n) {
    while (s.t < times[n] - 1e-12 * std::max(1.0, times[n])) {
      if (last_good) *last_good = s;
      solver.step(s, std::min(solver.stable_dt(s), times[n] - s.t));
      ++run.steps;
    }
    s.t = times[n];
    run.rows.push_back(series_row(solver, s));
    if (o.keep_states) run.states.push_back(s);
  }
  if (final) *final = std::move(s);
}

inline IncompressibleRun run_incompressible(const IncompressibleSolver& solver, IncState s, const RunOptions& o) {
  IncompressibleRun run;
  run_incompressible_into(run, solver, std::move(s), o);
  return run;
}

/// Frequency of the largest periodogram peak of uniformly sampled data,
/// ignoring frequencies below 1/T; refined by parabolic interpolation on a
/// zero-padded spectrum.
inline double dominant_frequency(const std::vector<double>& samples, double dt) {
  require(samples.size() >= 8 && dt > 0.0, ErrorKind::parameter, "dominant_frequency: need >= 8 samples");
  const std::size_t n = samples.size();
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  const std::size_t pad = 16 * n;
  std::vector<double> in(pad, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * k / static_cast<double>(n - 1));  // Hann window
    in[k] = (samples[k] - mean) * w;
  }
  std::vector<std::complex<double>> out(pad / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(pad), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double T = dt * static_cast<double>(n - 1);
  const double df = 1.0 / (dt * static_cast<double>(pad));
  std::size_t best = 0;
  double bv = -1.0;
  for (std::size_t k = 1; k + 1 < out.size(); ++k) {
    if (k * df < 1.0 / T) continue;
    const double v = std::norm(out[k]);
    if (v > bv) {
      bv = v;
      best = k;
    }
  }
  require(best > 0, ErrorKind::parameter, "dominant_frequency: no admissible peak");
  const double a = std::log(std::norm(out[best - 1]) + 1e-300), b = std::log(bv + 1e-300),
               c = std::log(std::norm(out[best + 1]) + 1e-300);
  const double den = a - 2.0 * b + c;
  const double shift = den != 0.0 ? 0.5 * (a - c) / den : 0.0;
  return (static_cast<double>(best) + shift) * df;
}

/// Dominant frequency of t ↦ ∫p² for an acoustic packet over a window of
/// `window_over_eps`·ε time units.
inline double acoustic_frequency(const CompressibleSolver& solver, EulerState s, double window_over_eps = 2.0) {
  const double T = window_over_eps * solver.eps();
  const double dt = solver.stable_dt(s);
  const int n = static_cast<int>(std::ceil(T / dt));
  const double h = T / n;
  std::vector<double> e;
  e.reserve(n + 1);
  auto energy = [](const EulerState& st) {
    const double l = l2_norm(st.p);
    return l * l;
  };
  e.push_back(energy(s));
  for (int k = 0; k < n; ++k) {
    solver.step(s, h);
    e.push_back(energy(s));
  }
  return dominant_frequency(e, h);
}

}  // namespace machlab

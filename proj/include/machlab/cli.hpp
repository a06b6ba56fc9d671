#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "machlab/compressible.hpp"
#include "machlab/config.hpp"
#include "machlab/data.hpp"
#include "machlab/errors.hpp"
#include "machlab/geometry.hpp"
#include "machlab/incompressible.hpp"
#include "machlab/io.hpp"
#include "machlab/norms.hpp"
#include "machlab/run.hpp"
#include "machlab/verify.hpp"

namespace machlab {

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_config = 2, exit_blowup = 3 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::parameter:
    case ErrorKind::data: return exit_config;
    case ErrorKind::blowup: return exit_blowup;
    default: return exit_failure;
  }
}

struct VerifyOptions {
  std::uint64_t seed = RandomFieldFamily::kDefaultSeed;
  int n_r = 128;             // coarse level; the fine level doubles n_r and n_theta
  int commutator_n_r = 256;  // coarse level of the commutator suite
  int n_fields = 10;
  int n_scalar_fields = 5;
  int J_max = 8;
  int M_max = 8;
  double slack = 0.2;
  double analyticity_bound = 10.0;
  double commutator_tol = 1e-7;
  double partial_commutator_tol = 1e-5;
  double tangency_tol = 1e-6;
  bool corrupt_frame = false;

  static VerifyOptions from_config(const Config& cfg) {
    VerifyOptions o;
    o.seed = static_cast<std::uint64_t>(cfg.get_int("verify.seed", static_cast<int>(o.seed)));
    o.n_r = cfg.get_int("verify.n_r", o.n_r);
    o.commutator_n_r = cfg.get_int("verify.commutator_n_r", o.commutator_n_r);
    o.n_fields = cfg.get_int("verify.n_fields", o.n_fields);
    o.n_scalar_fields = cfg.get_int("verify.n_scalar_fields", o.n_scalar_fields);
    o.J_max = cfg.get_int("verify.J_max", o.J_max);
    o.M_max = cfg.get_int("verify.M_max", o.M_max);
    o.slack = cfg.get_double("verify.slack", o.slack);
    o.analyticity_bound = cfg.get_double("verify.analyticity_bound", o.analyticity_bound);
    o.commutator_tol = cfg.get_double("verify.commutator_tol", o.commutator_tol);
    o.partial_commutator_tol = cfg.get_double("verify.partial_commutator_tol", o.partial_commutator_tol);
    o.tangency_tol = cfg.get_double("verify.tangency_tol", o.tangency_tol);
    o.corrupt_frame = cfg.get_bool("verify.corrupt_frame", o.corrupt_frame);
    require(o.n_fields >= 1 && o.n_scalar_fields >= 1, ErrorKind::config, "verify needs at least one field");
    require(o.slack >= 0.0, ErrorKind::config, "verify.slack must be nonnegative");
    return o;
  }
};

/// Everything one config file drives.
struct RunConfig {
  Config raw;
  ExteriorDomain domain;
  int n_r = 256;
  int n_theta = 128;
  DefiningOptions defining;
  EOS eos;
  NormParams norms;
  CompressibleOptions compressible;
  IncompressibleOptions incompressible;
  DataSpec data;
  RunOptions run;
  std::string model = "compressible";
  double eps = 0.1;
  std::vector<double> eps_list{0.1, 0.05, 0.025, 0.0125};
  int workers = 1;
  VerifyOptions verify;

  static RunConfig from_config(const Config& cfg) {
    RunConfig c;
    c.raw = cfg;
    c.domain = ExteriorDomain::from_config(cfg);
    c.n_r = cfg.get_int("geometry.n_r", c.n_r);
    c.n_theta = cfg.get_int("geometry.n_theta", c.n_theta);
    c.defining.eps_moll = cfg.get_double("geometry.eps_moll", c.defining.eps_moll);
    c.eos = EOS::from_config(cfg);
    c.norms = NormParams::from_config(cfg);
    c.compressible = CompressibleOptions::from_config(cfg);
    c.incompressible = IncompressibleOptions::from_config(cfg);
    c.data = DataSpec::from_config(cfg);
    c.run = RunOptions::from_config(cfg);
    c.model = cfg.get_string("model", c.model);
    c.eps = cfg.get_double("eps", c.eps);
    c.eps_list = cfg.get_doubles("eps_list", c.eps_list);
    c.workers = cfg.get_int("workers", c.workers);
    c.verify = VerifyOptions::from_config(cfg);
    c.validate();
    return c;
  }

  static RunConfig load(const std::string& path) { return from_config(Config::load(path)); }

  void validate() const {
    require(model == "compressible" || model == "incompressible", ErrorKind::config,
            "model must be compressible or incompressible");
    require(eps > 0.0 && eps <= 1.0, ErrorKind::config, "eps must lie in (0, 1]");
    require(!eps_list.empty(), ErrorKind::config, "eps_list is empty");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
      require(eps_list[i] > 0.0 && eps_list[i] <= 1.0, ErrorKind::config, "eps_list entries must lie in (0, 1]");
      if (i) require(eps_list[i] < eps_list[i - 1], ErrorKind::config, "eps_list must be strictly decreasing");
    }
    require(workers >= 1, ErrorKind::config, "workers must be >= 1");
    run.validate(model == "compressible");
  }

  Geometry geometry() const { return build_geometry(domain, n_r, n_theta, defining); }
};

/// Runs fn(0..n−1) on up to `workers` threads; results stay indexed, so the
/// outcome does not depend on scheduling. Exceptions are returned per index.
template <class Fn>
std::vector<std::exception_ptr> parallel_for(int n, int workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int nt = std::max(1, std::min(workers, n));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return errors;
}

// ---------------------------------------------------------------------------
// Commands. Each returns an exit code; library errors propagate as exceptions
// and are mapped by run_command.
// ---------------------------------------------------------------------------

inline int cmd_build_frame(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log = std::cout) {
  Geometry geo = cfg.geometry();
  write_field_csv(out / "frame.csv", geo.defining.psi, &geo.frame.b);
  write_field_csv(out / "normal.csv", geo.sdf.d, &geo.nu);
  const auto rep = check_frame(geo.frame, geo.sdf, cfg.verify.tangency_tol);
  nlohmann::ordered_json j;
  j["n_r"] = cfg.n_r;
  j["n_theta"] = cfg.n_theta;
  j["circular"] = geo.domain.circular();
  j["eps_moll"] = cfg.defining.eps_moll;
  j["collar_width"] = geo.domain.collar_width;
  j["tangency_residual"] = rep.rows[0].lhs;
  j["span_residual"] = rep.rows[1].lhs;
  j["tolerance"] = cfg.verify.tangency_tol;
  j["grad_psi_min_on_collar"] = geo.defining.grad_lower_bound;
  j["helmholtz_iterations"] = geo.helmholtz.iterations;
  j["helmholtz_residual"] = geo.helmholtz.residual;
  j["within_tolerance"] = rep.pass;
  auto f = detail::open_out(out / "certificate.json");
  f << j.dump(2) << '\n';
  log << "tangency " << fmt(rep.rows[0].lhs) << ", span " << fmt(rep.rows[1].lhs) << '\n';
  return exit_ok;
}

inline int cmd_solve(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log = std::cout) {
  Geometry geo = cfg.geometry();
  if (cfg.model == "incompressible") {
    // The limit system needs no acoustic compatibility, so raw data are projected directly.
    const EulerFields s0 = raw_data(geo.grid, cfg.data);
    const IncompressibleSolver solver(geo.grid, cfg.eos, cfg.incompressible);
    IncompressibleRun run;
    IncState last, final;
    RunOptions o = cfg.run;
    o.keep_states = false;
    try {
      run_incompressible_into(run, solver, solver.project_initial(s0.v, s0.S), o, &last, &final);
    } catch (const Error& e) {
      write_series_csv(out / "series.csv", run.rows, true);
      if (e.kind() == ErrorKind::blowup) write_state_csv(out / "last_good_state.csv", EulerFields(last.pi, last.v, last.S));
      throw;
    }
    write_series_csv(out / "series.csv", run.rows, true);
    write_state_csv(out / "final_state.csv", EulerFields(final.pi, final.v, final.S));
    log << "incompressible run: " << run.steps << " steps to t = " << fmt(cfg.run.t_end) << '\n';
    return exit_ok;
  }
  const EulerState s0 = well_prepared_data(geo.grid, cfg.eos, cfg.data, cfg.eps);
  const CompressibleSolver solver(geo.grid, cfg.eos, cfg.eps, cfg.compressible);
  CompressibleRun run;
  EulerState last;
  RunOptions o = cfg.run;
  try {
    run_compressible_into(run, solver, s0, &geo.frame, o, &last);
  } catch (const Error& e) {
    write_series_csv(out / "series.csv", run.rows, false);
    if (e.kind() == ErrorKind::blowup) write_state_csv(out / "last_good_state.csv", last);
    throw;
  }
  write_series_csv(out / "series.csv", run.rows, false);
  if (!run.states.empty()) write_state_csv(out / "final_state.csv", run.states.back());
  log << "compressible run eps = " << fmt(cfg.eps) << ": " << run.steps << " steps, max|v.nu| = " << fmt(run.max_vnu)
      << ", S drift rate = " << fmt(run.s_drift_rate) << '\n';
  return exit_ok;
}

/// Everything one sweep produced, for callers that want more than the CSVs.
struct SweepOutcome {
  std::vector<SweepRow> rows;
  IncompressibleRun reference;
  std::vector<CompressibleRun> runs;
};

inline int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out, int workers, std::ostream& log = std::cout,
                     SweepOutcome* outcome = nullptr) {
  using clock = std::chrono::steady_clock;
  Geometry geo = cfg.geometry();
  const int n = static_cast<int>(cfg.eps_list.size());
  // The reference data do not depend on ε (p₀ = 0).
  const EulerState ref0 = well_prepared_data(geo.grid, cfg.eos, cfg.data, cfg.eps_list.front());
  const IncompressibleSolver inc(geo.grid, cfg.eos, cfg.incompressible);
  const IncompressibleRun ref = run_incompressible(inc, inc.project_initial(ref0.v, ref0.S), cfg.run);
  write_series_csv(out / "reference_series.csv", ref.rows, true);
  log << "incompressible reference: " << ref.steps << " steps\n";

  std::vector<SweepRow> rows(n);
  std::vector<CompressibleRun> runs(n);
  auto errors = parallel_for(n, workers, [&](int m) {
    const auto t0 = clock::now();
    const double eps = cfg.eps_list[m];
    const CompressibleSolver solver(geo.grid, cfg.eos, eps, cfg.compressible);
    CompressibleRun run = run_compressible(solver, well_prepared_data(geo.grid, cfg.eos, cfg.data, eps), &geo.frame,
                                           cfg.run);
    SweepRow& r = rows[m];
    r.eps = eps;
    r.limit_distance = limit_distance(run.states, ref.states, cfg.norms.delta, cfg.norms.N_max);
    r.sup_normA = run.sup_normA();
    r.sup_divv = run.sup_divv();
    r.wallclock = std::chrono::duration<double>(clock::now() - t0).count();
    write_series_csv(out / ("series_" + std::to_string(m) + ".csv"), run.rows, false);
    runs[m] = std::move(run);
  });

  std::vector<SweepRow> done;
  std::exception_ptr first;
  for (int m = 0; m < n; ++m) {
    if (errors[m]) {
      if (!first) first = errors[m];
      continue;
    }
    done.push_back(rows[m]);
    log << "eps " << fmt(rows[m].eps) << ": distance " << fmt(rows[m].limit_distance) << ", sup normA "
        << fmt(rows[m].sup_normA) << ", sup div " << fmt(rows[m].sup_divv) << '\n';
  }
  write_sweep_csv(out / "sweep.csv", done);
  write_sweep_timing(out / "sweep_timing.txt", done);
  if (outcome) {
    outcome->rows = done;
    outcome->reference = ref;
    outcome->runs = std::move(runs);
  }
  if (first) std::rethrow_exception(first);
  return exit_ok;
}

/// Named tangential fields used alongside the random family.
inline std::vector<NamedVector> named_tangential_fields() {
  std::vector<NamedVector> out;
  out.push_back({"perp_grad_bump", [](const GridPtr& g) {
                   return perp_grad(ScalarField::from_function(
                       g, [](double x, double y) { return bump((std::hypot(x, y) - 3.0) / 1.5); }));
                 }});
  out.push_back({"rotation_cutoff", [](const GridPtr& g) {
                   return RandomFieldFamily::make_tangential(VectorField::from_function(g, [](double x, double y) {
                     const double r = std::hypot(x, y), c = std::exp(-(r - 1.0) * (r - 1.0));
                     return Vec2{-y * c, x * c};
                   }));
                 }});
  return out;
}

inline std::vector<InequalityReport> run_verify_suite(const RunConfig& cfg, int workers) {
  const VerifyOptions& v = cfg.verify;
  auto theta = [&](int nr) { return nr * cfg.n_theta / cfg.n_r; };
  const VerifyLevel a = make_level(cfg.domain, v.n_r, theta(v.n_r), cfg.defining);
  const VerifyLevel b = make_level(cfg.domain, 2 * v.n_r, theta(2 * v.n_r), cfg.defining);
  const VerifyLevel c = make_level(cfg.domain, v.commutator_n_r, theta(v.commutator_n_r), cfg.defining);
  const VerifyLevel d = make_level(cfg.domain, 2 * v.commutator_n_r, theta(2 * v.commutator_n_r), cfg.defining);
  const std::vector<const VerifyLevel*> base{&a, &b}, fine{&c, &d};

  RandomFieldFamily fam(v.seed);
  const auto scalars = fam.scalars(v.n_scalar_fields);
  auto tangential = fam.tangential_vectors(v.n_fields);
  for (auto& f : named_tangential_fields()) tangential.push_back(f);
  const auto comm_scalars = fam.scalars(v.n_fields, "comm");
  const auto comm_vectors = fam.vectors(v.n_fields, "comm");

  const TangentialFrame frame = v.corrupt_frame ? corrupt_frame(b.geo.frame) : b.geo.frame;
  std::vector<std::function<std::vector<InequalityReport>()>> tasks{
      [&] { return std::vector{check_frame(frame, b.geo.sdf, v.tangency_tol)}; },
      [&] { return std::vector{check_interpolation(scalars, base, v.J_max, v.slack)}; },
      [&] { return std::vector{check_divcurl(tangential, base, v.slack)}; },
      [&] { return std::vector{check_h2(tangential, base, v.slack)}; },
      [&] { return check_reductions(tangential, base, v.slack); },
      [&] { return std::vector{check_normal_analyticity(base, v.M_max, v.analyticity_bound, v.slack)}; },
      [&] {
        return std::vector{
            check_commutator_suite(comm_scalars, comm_vectors, fine, 3, v.commutator_tol, v.partial_commutator_tol)};
      },
  };
  std::vector<std::vector<InequalityReport>> results(tasks.size());
  auto errors = parallel_for(static_cast<int>(tasks.size()), workers, [&](int i) { results[i] = tasks[i](); });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<InequalityReport> reps;
  for (auto& r : results)
    for (auto& x : r) reps.push_back(std::move(x));
  return reps;
}

inline int cmd_verify(const RunConfig& cfg, const std::filesystem::path& out, int workers,
                      std::ostream& log = std::cout) {
  const auto reps = run_verify_suite(cfg, workers);
  bool all = true;
  for (const auto& r : reps) {
    write_report_csv(out / (r.name + ".csv"), r);
    log << summary_line(r) << '\n';
    all = all && r.pass;
  }
  write_summary(out / "summary.txt", reps);
  return all ? exit_ok : exit_failure;
}

/// Loads the config, runs the named command and maps errors onto exit codes.
inline int run_command(const std::string& name, const std::string& config_path, const std::filesystem::path& out,
                       int workers_flag, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  try {
    const RunConfig cfg = RunConfig::load(config_path);
    const int workers = workers_flag > 0 ? workers_flag : cfg.workers;
    if (name == "build-frame") return cmd_build_frame(cfg, out, log);
    if (name == "solve") return cmd_solve(cfg, out, log);
    if (name == "sweep") return cmd_sweep(cfg, out, workers, log);
    if (name == "verify") return cmd_verify(cfg, out, workers, log);
    err << "unknown command '" << name << "'\n";
    return exit_config;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_failure;
  }
}

}  // namespace machlab

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "machlab/compressible.hpp"
#include "machlab/errors.hpp"
#include "machlab/field.hpp"
#include "machlab/fieldops.hpp"
#include "machlab/norms.hpp"
#include "machlab/run.hpp"
#include "machlab/verify.hpp"

namespace machlab {

/// 17 significant digits, enough to round-trip a double.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {
inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::config, "cannot write '" + path.string() + "'");
  return out;
}
}  // namespace detail

/// `r,theta,value[,vx,vy]` row-major in (r, θ); r is the physical radius.
inline void write_field_csv(const std::filesystem::path& path, const ScalarField& value,
                            const VectorField* vec = nullptr) {
  auto out = detail::open_out(path);
  const Grid& g = value.grid();
  out << (vec ? "r,theta,value,vx,vy\n" : "r,theta,value\n");
  for (int i = 0; i < g.n_r(); ++i)
    for (int j = 0; j < g.n_theta(); ++j) {
      const std::size_t k = g.index(i, j);
      out << fmt(g.r()[k]) << ',' << fmt(g.theta()[j]) << ',' << fmt(value[k]);
      if (vec) out << ',' << fmt(vec->x[k]) << ',' << fmt(vec->y[k]);
      out << '\n';
    }
}

/// Full state dump `r,theta,p,vx,vy,S`.
inline void write_state_csv(const std::filesystem::path& path, const EulerFields& u) {
  auto out = detail::open_out(path);
  const Grid& g = u.p.grid();
  out << "r,theta,p,vx,vy,S\n";
  for (int i = 0; i < g.n_r(); ++i)
    for (int j = 0; j < g.n_theta(); ++j) {
      const std::size_t k = g.index(i, j);
      out << fmt(g.r()[k]) << ',' << fmt(g.theta()[j]) << ',' << fmt(u.p[k]) << ',' << fmt(u.v.x[k]) << ','
          << fmt(u.v.y[k]) << ',' << fmt(u.S[k]) << '\n';
    }
}

/// Stack export: one row per node and stored component, `j,k,i,comp,r,theta,value`.
inline void write_stack_csv(const std::filesystem::path& path, const DerivativeStack& stack) {
  auto out = detail::open_out(path);
  out << "j,k,i,comp,r,theta,value\n";
  for (const auto& [idx, entry] : stack.entries()) {
    for (std::size_t c = 0; c < entry.comps.size(); ++c) {
      const ScalarField& f = entry.comps[c];
      const Grid& g = f.grid();
      for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta(); ++j) {
          const std::size_t k = g.index(i, j);
          out << idx.j << ',' << idx.k << ',' << idx.i << ',' << c << ',' << fmt(g.r()[k]) << ','
              << fmt(g.theta()[j]) << ',' << fmt(f[k]) << '\n';
        }
    }
  }
}

/// `j,k,i,weight,l2,term` then `total,tail_bound`.
inline void write_breakdown_csv(const std::filesystem::path& path, const NormBreakdown& b) {
  auto out = detail::open_out(path);
  out << "j,k,i,weight,l2,term\n";
  for (const auto& [idx, term] : b.terms)
    out << idx.j << ',' << idx.k << ',' << idx.i << ',' << fmt(b.weights.at(idx)) << ',' << fmt(b.l2.at(idx)) << ','
        << fmt(term) << '\n';
  out << "total,tail_bound\n" << fmt(b.total) << ',' << fmt(b.tail_bound) << '\n';
}

/// Time series `t,l2_p,l2_divv,normA,max_vnu,min_S,max_S[,l2_pi]`.
inline void write_series_csv(const std::filesystem::path& path, const std::vector<SeriesRow>& rows,
                             bool incompressible) {
  auto out = detail::open_out(path);
  out << "t,l2_p,l2_divv,normA,max_vnu,min_S,max_S" << (incompressible ? ",l2_pi\n" : "\n");
  for (const auto& r : rows) {
    out << fmt(r.t) << ',' << fmt(r.l2_p) << ',' << fmt(r.l2_divv) << ',' << fmt(r.normA) << ',' << fmt(r.max_vnu)
        << ',' << fmt(r.min_S) << ',' << fmt(r.max_S);
    if (incompressible) out << ',' << fmt(r.l2_pi);
    out << '\n';
  }
}

struct SweepRow {
  double eps = 0.0;
  double limit_distance = 0.0;
  double sup_normA = 0.0;
  double sup_divv = 0.0;
  double wallclock = 0.0;  // seconds; kept out of sweep.csv so that file is reproducible
};

inline void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  auto out = detail::open_out(path);
  out << "eps,limit_distance,sup_normA,sup_divv\n";
  for (const auto& r : rows)
    out << fmt(r.eps) << ',' << fmt(r.limit_distance) << ',' << fmt(r.sup_normA) << ',' << fmt(r.sup_divv) << '\n';
}

inline void write_sweep_timing(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  auto out = detail::open_out(path);
  out << "eps,wallclock_s\n";
  for (const auto& r : rows) out << fmt(r.eps) << ',' << fmt(r.wallclock) << '\n';
}

inline std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SweepRow r;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &r.eps, &r.limit_distance, &r.sup_normA, &r.sup_divv) != 4)
      fail(ErrorKind::config, "malformed sweep row '" + line + "'");
    rows.push_back(r);
  }
  return rows;
}

/// `field_id,quantity,lhs,rhs,ratio` with a `level` column for refinement.
inline void write_report_csv(const std::filesystem::path& path, const InequalityReport& rep) {
  auto out = detail::open_out(path);
  out << "field_id,quantity,level,lhs,rhs,ratio\n";
  for (const auto& r : rep.rows)
    out << r.field_id << ',' << r.quantity << ',' << rep.levels[r.level] << ',' << fmt(r.lhs) << ',' << fmt(r.rhs)
        << ',' << fmt(r.ratio) << '\n';
}

/// `name: pass|fail, constant=…` followed by the per-level constants, orders and notes.
inline std::string summary_line(const InequalityReport& rep) {
  std::string s = rep.name + ": " + (rep.pass ? "pass" : "fail") + ", constant=" + fmt(rep.constant);
  s += ", levels=[";
  for (std::size_t l = 0; l < rep.levels.size(); ++l) s += (l ? "," : "") + std::to_string(rep.levels[l]);
  s += "], constants=[";
  for (std::size_t l = 0; l < rep.constants.size(); ++l) s += (l ? "," : "") + fmt(rep.constants[l]);
  s += "]";
  if (!rep.refinement_orders.empty()) {
    s += ", orders=[";
    for (std::size_t l = 0; l < rep.refinement_orders.size(); ++l) s += (l ? "," : "") + fmt(rep.refinement_orders[l]);
    s += "]";
  }
  return s;
}

inline void write_summary(const std::filesystem::path& path, const std::vector<InequalityReport>& reps) {
  auto out = detail::open_out(path);
  out << "{\n";
  for (const auto& r : reps) {
    out << "  " << summary_line(r) << '\n';
    for (const auto& n : r.notes) out << "    # " << n << '\n';
  }
  out << "}\n";
}

}  // namespace machlab

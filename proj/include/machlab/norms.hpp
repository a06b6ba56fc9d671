#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "machlab/config.hpp"
#include "machlab/errors.hpp"
#include "machlab/fieldops.hpp"

namespace machlab {

struct NormParams {
  double tau0 = 0.5;
  double K = 1.25;
  double kappa = 1.0;
  double kappa_bar = 1.0;
  double delta = 0.1;
  int N_max = 8;
  int I_max = 4;

  double horizon() const { return tau0 / (2.0 * K); }

  void validate() const {
    require(tau0 > 0.0 && tau0 <= 1.0, ErrorKind::parameter, "tau0 must lie in (0, 1]");
    require(K >= 1.0, ErrorKind::parameter, "K must be >= 1");
    require(kappa > 0.0 && kappa <= kappa_bar && kappa_bar <= 1.0, ErrorKind::parameter,
            "need 0 < kappa <= kappa_bar <= 1");
    require(delta > 0.0, ErrorKind::parameter, "delta must be positive");
    require(N_max >= 0 && N_max <= 12, ErrorKind::parameter, "N_max must lie in [0, 12]");
    require(I_max >= 0 && I_max <= 4, ErrorKind::parameter, "I_max must lie in [0, 4]");
  }

  static NormParams from_config(const Config& cfg) {
    NormParams p;
    p.tau0 = cfg.get_double("norms.tau0", p.tau0);
    p.K = cfg.get_double("norms.K", p.K);
    p.kappa = cfg.get_double("norms.kappa", p.kappa);
    p.kappa_bar = cfg.get_double("norms.kappa_bar", p.kappa_bar);
    p.delta = cfg.get_double("norms.delta", p.delta);
    p.N_max = cfg.get_int("norms.N_max", p.N_max);
    p.I_max = cfg.get_int("norms.I_max", p.I_max);
    p.validate();
    return p;
  }

  StackCaps caps() const { return StackCaps{N_max, N_max, I_max}; }
};

/// τ(t) = τ(0) − K t on 0 ≤ t ≤ τ(0)/(2K).
inline double tau_at(const NormParams& p, double t) {
  require(t >= 0.0 && t <= p.horizon() * (1.0 + 1e-12), ErrorKind::parameter,
          "t = " + std::to_string(t) + " lies outside [0, tau0/(2K)] = [0, " + std::to_string(p.horizon()) + "]");
  return p.tau0 - p.K * t;
}

/// n! with n! = 1 for n ≤ 0.
inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline int pos(int n) { return n > 0 ? n : 0; }

inline double weight_A(int j, int k, int i, double kappa, double kappa_bar, double tau) {
  const int n = j + k + i;
  return std::pow(kappa, pos(j - 1)) * std::pow(kappa_bar, k) * std::pow(tau, pos(n - 3)) / factorial(n - 3);
}

inline double weight_B(int j, int k, int i, double kappa, double kappa_bar, double tau) {
  const int n = j + k + i;
  return std::pow(kappa, j) * std::pow(kappa_bar, k) * std::pow(tau, pos(n - 2)) / factorial(n - 2);
}

inline double weight_X(int j, double delta) { return std::pow(delta, pos(j - 3)) / factorial(j - 3); }

struct NormBreakdown {
  double total = 0.0;
  double tail_bound = 0.0;
  std::map<StackIndex, double> weights;
  std::map<StackIndex, double> l2;
  std::map<StackIndex, double> terms;

  /// Sum of terms with j + k + i = n.
  double shell(int n) const {
    double s = 0.0;
    for (const auto& [idx, v] : terms)
      if (idx.j + idx.k + idx.i == n) s += v;
    return s;
  }
};

namespace detail {

/// Geometric continuation of the last two shells.
inline double geometric_tail(const NormBreakdown& b, int n_max) {
  if (n_max < 1) return 0.0;
  const double last = b.shell(n_max), prev = b.shell(n_max - 1);
  if (last == 0.0) return 0.0;
  if (prev == 0.0) return std::numeric_limits<double>::infinity();
  const double q = last / prev;
  if (q >= 1.0) return std::numeric_limits<double>::infinity();
  return last * q / (1.0 - q);
}

template <class Weight>
NormBreakdown weighted_sum(const L2Table& table, int n_max, int k_max, int i_max, Weight&& w) {
  NormBreakdown b;
  for (int n = 0; n <= n_max; ++n)
    for (int i = 0; i <= std::min(i_max, n); ++i)
      for (int k = 0; k <= std::min(k_max, n - i); ++k) {
        const int j = n - i - k;
        const StackIndex idx{j, k, i};
        auto it = table.find(idx);
        if (it == table.end())
          fail(ErrorKind::norm, "stack has no entry (" + std::to_string(j) + "," + std::to_string(k) + "," +
                                    std::to_string(i) + ")");
        const double wt = w(j, k, i);
        b.weights[idx] = wt;
        b.l2[idx] = it->second;
        b.terms[idx] = wt * it->second;
        b.total += wt * it->second;
      }
  b.tail_bound = geometric_tail(b, n_max);
  return b;
}

}  // namespace detail

inline NormBreakdown norm_A(const L2Table& table, const NormParams& p, double t) {
  const double tau = tau_at(p, t);
  return detail::weighted_sum(table, p.N_max, p.N_max, p.I_max, [&](int j, int k, int i) {
    return weight_A(j, k, i, p.kappa, p.kappa_bar, tau);
  });
}

inline NormBreakdown norm_A(const DerivativeStack& s, const NormParams& p, double t) {
  return norm_A(s.l2_table(), p, t);
}

inline NormBreakdown norm_B(const L2Table& table, const NormParams& p, double t) {
  const double tau = tau_at(p, t);
  return detail::weighted_sum(table, p.N_max, p.N_max, p.I_max, [&](int j, int k, int i) {
    return weight_B(j, k, i, p.kappa, p.kappa_bar, tau);
  });
}

inline NormBreakdown norm_B(const DerivativeStack& s, const NormParams& p, double t) {
  return norm_B(s.l2_table(), p, t);
}

/// X(δ): spatial derivatives only, from the (j,0,0) entries of a table.
inline NormBreakdown norm_X(const L2Table& table, double delta, int n_max) {
  return detail::weighted_sum(table, n_max, 0, 0, [&](int j, int, int) { return weight_X(j, delta); });
}

/// X(δ) norm of a multi-component field computed directly.
inline NormBreakdown norm_X(const std::vector<ScalarField>& comps, double delta, int n_max) {
  L2Table t;
  std::vector<std::vector<std::vector<ScalarField>>> tens;
  for (const auto& c : comps) tens.push_back(spatial_tensors(c, n_max));
  for (int j = 0; j <= n_max; ++j) {
    const auto m = tensor_multiplicity(j);
    double s = 0.0;
    for (const auto& tc : tens)
      for (int a = 0; a <= j; ++a) {
        const double v = l2_norm(tc[j][a]);
        s += m[a] * v * v;
      }
    t[{j, 0, 0}] = std::sqrt(s);
  }
  return norm_X(t, delta, n_max);
}

/// sup over j + k + i ≤ 4 of the entry norms.
inline double norm_Y(const L2Table& table) {
  double y = 0.0;
  for (const auto& [idx, v] : table)
    if (idx.j + idx.k + idx.i <= 4) y = std::max(y, v);
  return y;
}

inline double norm_Y(const DerivativeStack& s) { return norm_Y(s.l2_table()); }

}  // namespace machlab

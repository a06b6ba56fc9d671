#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "machlab/errors.hpp"

namespace machlab {

/// Finite-difference weights for the derivative of order `order` at `z` using
/// the nodes `x` (Fornberg's recursion; works on non-uniform nodes).
inline std::vector<double> fd_weights(double z, std::span<const double> x, int order) {
  const int n = static_cast<int>(x.size()) - 1;
  require(n >= order, ErrorKind::parameter, "fd_weights: too few nodes for derivative order");
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(order + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = c[i][order];
  return w;
}

/// Banded 1D derivative operator along the radial index: row i reads
/// `weights[i]` starting at node `start[i]`. Interior rows are centered;
/// rows near either end switch to one-sided windows of the same formal order.
class RadialOperator {
 public:
  RadialOperator() = default;

  /// `accuracy` is the formal order (even). Centered rows use accuracy+1
  /// nodes; boundary rows use accuracy+order nodes.
  RadialOperator(std::span<const double> nodes, int order, int accuracy) : order_(order) {
    const int n = static_cast<int>(nodes.size());
    const int half = accuracy / 2;
    const int centered = 2 * half + 1;
    const int one_sided = accuracy + order;
    require(n >= one_sided, ErrorKind::parameter, "RadialOperator: too few radial nodes");
    start_.resize(n);
    weights_.resize(n);
    for (int i = 0; i < n; ++i) {
      int s = 0;
      int w = 0;
      if (i - half >= 0 && i + half <= n - 1) {
        s = i - half;
        w = centered;
      } else {
        w = one_sided;
        s = std::clamp(i - half, 0, n - w);
      }
      start_[i] = s;
      weights_[i] = fd_weights(nodes[i], nodes.subspan(s, w), order);
    }
  }

  int order() const { return order_; }
  int rows() const { return static_cast<int>(start_.size()); }
  int start(int row) const { return start_[row]; }
  const std::vector<double>& weights(int row) const { return weights_[row]; }

  /// Applies the operator to `in` laid out as rows of `stride` contiguous values.
  void apply(std::span<const double> in, std::span<double> out, std::size_t stride) const {
    const int n = rows();
    for (int i = 0; i < n; ++i) {
      double* o = out.data() + static_cast<std::size_t>(i) * stride;
      std::fill(o, o + stride, 0.0);
      const auto& w = weights_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double* src = in.data() + static_cast<std::size_t>(start_[i] + static_cast<int>(k)) * stride;
        const double wk = w[k];
        for (std::size_t j = 0; j < stride; ++j) o[j] += wk * src[j];
      }
    }
  }

 private:
  int order_ = 1;
  std::vector<int> start_;
  std::vector<std::vector<double>> weights_;
};

}  // namespace machlab

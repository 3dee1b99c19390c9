#pragma once

// Brute-force reference computations used only by the tests. Nothing here
// calls into the library code under test except for plain data accessors.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "crfconv/cloud.hpp"
#include "crfconv/energy.hpp"

namespace oracle {

using crfconv::FeatureMatrix;
using crfconv::Matrix;
using crfconv::NeighborGraph;
using crfconv::NodeIndex;
using crfconv::PositionMatrix;
using crfconv::Vector;

inline double dist2(const PositionMatrix& p, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double t = p(static_cast<Eigen::Index>(i), a) - p(static_cast<Eigen::Index>(j), a);
    s += t * t;
  }
  return s;
}

/// All other points of node i sorted by (squared distance, index).
inline std::vector<std::pair<double, std::size_t>> ranked(const PositionMatrix& p, std::size_t i) {
  std::vector<std::pair<double, std::size_t>> out;
  for (std::size_t j = 0; j < static_cast<std::size_t>(p.rows()); ++j) {
    if (j != i) out.emplace_back(dist2(p, i, j), j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::vector<NodeIndex>> knn(const PositionMatrix& p, std::size_t k, std::size_t dil = 1) {
  std::vector<std::vector<NodeIndex>> lists(static_cast<std::size_t>(p.rows()));
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const auto r = ranked(p, i);
    for (std::size_t rank = dil; rank <= k * dil && rank <= r.size(); rank += dil) lists[i].push_back(r[rank - 1].second);
  }
  return lists;
}

inline std::vector<std::vector<NodeIndex>> within(const PositionMatrix& p, double radius_sq) {
  std::vector<std::vector<NodeIndex>> lists(static_cast<std::size_t>(p.rows()));
  for (std::size_t i = 0; i < lists.size(); ++i) {
    for (const auto& [d2, j] : ranked(p, i)) {
      if (d2 <= radius_sq) lists[i].push_back(j);
    }
  }
  return lists;
}

/// Fidelity plus directed smoothness sum, written from the definition.
inline double energy(const NeighborGraph& g, const Matrix& c, const FeatureMatrix& z, const FeatureMatrix& x) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index a = 0; a < z.cols(); ++a) e += (x(i, a) - z(i, a)) * (x(i, a) - z(i, a));
  }
  for (NodeIndex i = 0; i < g.num_nodes(); ++i) {
    const auto nb = g.neighbors(i);
    const auto w = g.weights(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const Vector diff = (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(nb[k]))).transpose();
      e += w[k] * diff.dot(c * diff);
    }
  }
  return e;
}

/// Minimizer of a quadratic f by recovering its Hessian and linear term with
/// polarization, then a full-pivot LU solve.
inline FeatureMatrix minimize_quadratic(const std::function<double(const FeatureMatrix&)>& f, Eigen::Index rows,
                                        Eigen::Index cols) {
  const Eigen::Index n = rows * cols;
  auto unit = [&](Eigen::Index a) {
    FeatureMatrix m = FeatureMatrix::Zero(rows, cols);
    if (a >= 0) m(a / cols, a % cols) = 1.0;
    return m;
  };
  const double f0 = f(unit(-1));
  std::vector<double> fa(static_cast<std::size_t>(n));
  for (Eigen::Index a = 0; a < n; ++a) fa[static_cast<std::size_t>(a)] = f(unit(a));
  Matrix h(n, n);
  Vector g(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    FeatureMatrix neg = -unit(a);
    // f(e) - f(-e) = 2 g.e ; f(e) + f(-e) - 2 f(0) = H_aa
    g(a) = 0.5 * (fa[static_cast<std::size_t>(a)] - f(neg));
    for (Eigen::Index b = 0; b < n; ++b) {
      h(a, b) = f(unit(a) + unit(b)) - fa[static_cast<std::size_t>(a)] - fa[static_cast<std::size_t>(b)] + f0;
    }
  }
  // f(x) = f0 + g.x + 1/2 x^T H x  =>  H x = -g
  const Vector x = h.fullPivLu().solve(-g);
  FeatureMatrix out(rows, cols);
  for (Eigen::Index a = 0; a < n; ++a) out(a / cols, a % cols) = x(a);
  return out;
}

/// Central differences of f at x with step h.
inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x;
    Vector xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-8});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline Vector flat(const FeatureMatrix& m) {
  Vector v(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) v(r * m.cols() + c) = m(r, c);
  }
  return v;
}

inline FeatureMatrix unflat(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  FeatureMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v(r * cols + c);
  }
  return m;
}

}  // namespace oracle

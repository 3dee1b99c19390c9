#pragma once

#include <Eigen/SparseCore>

#include "crfconv/cloud.hpp"
#include "crfconv/common.hpp"

namespace crfconv {

inline constexpr double kDefaultCompatEpsilon = 1e-4;

/// Positive-definite channel coupling C = c^T c + eps*I, or the exact identity.
class CompatibilityMatrix {
public:
  /// Exact identity of size d (no learnable factor).
  static CompatibilityMatrix identity(std::size_t d);
  static CompatibilityMatrix from_factor(Matrix c, double epsilon = kDefaultCompatEpsilon);

  std::size_t dim() const { return static_cast<std::size_t>(realized_.rows()); }
  const Matrix& realized() const { return realized_; }
  const Matrix& factor() const { return factor_; }
  double epsilon() const { return epsilon_; }
  bool is_identity() const { return identity_; }

private:
  CompatibilityMatrix() = default;

  Matrix factor_;
  Matrix realized_;
  double epsilon_ = 0.0;
  bool identity_ = false;
};

/// E(X) = sum_i |x_i - z_i|^2 + sum_i sum_{j in N(i)} s_ij (x_i - x_j)^T C (x_i - x_j).
/// The graph's edge weights are the similarities s_ij; each stored directed
/// edge contributes once.
struct QuadraticEnergyModel {
  NeighborGraph graph;
  CompatibilityMatrix compat;
  FeatureMatrix observed;

  QuadraticEnergyModel(NeighborGraph g, CompatibilityMatrix c, FeatureMatrix z);

  std::size_t num_nodes() const { return graph.num_nodes(); }
  std::size_t dim() const { return compat.dim(); }
};

double evaluate_energy(const QuadraticEnergyModel& model, const FeatureMatrix& x);

/// dE/dX, equal to 2 (A X - Z) with A = assemble_system(model).
FeatureMatrix energy_gradient(const QuadraticEnergyModel& model, const FeatureMatrix& x);

/// The (N*d)x(N*d) matrix I + D - W whose solution minimizes evaluate_energy.
/// Every directed edge (i, j) contributes s_ij*C to both diagonal blocks and
/// -s_ij*C to both off-diagonal blocks, so asymmetric similarities are
/// symmetrized consistently with the energy.
Eigen::SparseMatrix<double> assemble_system(const QuadraticEnergyModel& model);

struct ExactSolveOptions {
  /// Dense Cholesky up to this many unknowns, conjugate gradients above.
  std::size_t dense_limit = 4096;
  double cg_tolerance = 1e-14;
  /// 0 picks 10 * unknowns.
  std::size_t max_iterations = 0;
};

/// Closed-form minimizer X* = (I + D - W)^{-1} Z. Throws SolverError when the
/// residual exceeds 1e-8 * (1 + |Z|_inf).
FeatureMatrix solve_exact(const QuadraticEnergyModel& model, const ExactSolveOptions& options = {});

/// |(I + D - W) X - Z|_inf
double system_residual(const QuadraticEnergyModel& model, const FeatureMatrix& x);

/// h^T (I - D^{-1} W) h using the graph's edge weights. Rows without
/// neighbors (or with zero total weight) use the identity row. L is not
/// symmetric for asymmetric weights, so the value can be negative there.
double dirichlet_energy(const NeighborGraph& graph, const Vector& h);

/// max |L_ij - L_ji| over all node pairs, with L = I - D^{-1} W. Zero means
/// dirichlet_energy is a symmetric quadratic form and therefore >= 0.
double laplacian_asymmetry(const NeighborGraph& graph);

/// Sum of the per-channel Dirichlet energies.
double dirichlet_energy(const NeighborGraph& graph, const FeatureMatrix& h);

}  // namespace crfconv

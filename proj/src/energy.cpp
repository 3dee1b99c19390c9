#include "crfconv/energy.hpp"

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <cmath>
#include <vector>

namespace crfconv {

CompatibilityMatrix CompatibilityMatrix::identity(std::size_t d) {
  CompatibilityMatrix m;
  const auto n = static_cast<Eigen::Index>(d);
  m.factor_ = Matrix::Identity(n, n);
  m.realized_ = Matrix::Identity(n, n);
  m.identity_ = true;
  return m;
}

CompatibilityMatrix CompatibilityMatrix::from_factor(Matrix c, double epsilon) {
  if (c.rows() != c.cols()) throw ShapeError("compatibility factor must be square");
  if (!c.allFinite()) throw InvariantError("compatibility factor contains NaN or Inf");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvariantError("compatibility epsilon must be positive");
  CompatibilityMatrix m;
  m.realized_ = c.transpose() * c;
  m.realized_ = 0.5 * (m.realized_ + m.realized_.transpose()).eval();
  m.realized_.diagonal().array() += epsilon;
  m.factor_ = std::move(c);
  m.epsilon_ = epsilon;
  return m;
}

QuadraticEnergyModel::QuadraticEnergyModel(NeighborGraph g, CompatibilityMatrix c, FeatureMatrix z)
    : graph(std::move(g)), compat(std::move(c)), observed(std::move(z)) {
  if (!graph.has_weights()) throw InvariantError("energy model needs per-edge similarities");
  if (graph.num_nodes() != static_cast<std::size_t>(observed.rows())) {
    throw ShapeError("observed features do not match graph size");
  }
  if (compat.dim() != static_cast<std::size_t>(observed.cols())) {
    throw ShapeError("compatibility dimension does not match feature width");
  }
  if (!observed.allFinite()) throw InvariantError("observed features contain NaN or Inf");
}

namespace {

void check_shape(const QuadraticEnergyModel& model, const FeatureMatrix& x) {
  if (x.rows() != model.observed.rows() || x.cols() != model.observed.cols()) {
    throw ShapeError("feature array shape does not match the model");
  }
}

}  // namespace

double evaluate_energy(const QuadraticEnergyModel& model, const FeatureMatrix& x) {
  check_shape(model, x);
  const auto n = static_cast<std::ptrdiff_t>(model.num_nodes());
  const Matrix& c = model.compat.realized();
  std::vector<double> per_node(static_cast<std::size_t>(n), 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ui = static_cast<NodeIndex>(i);
    double e = (x.row(i) - model.observed.row(i)).squaredNorm();
    const auto nb = model.graph.neighbors(ui);
    const auto w = model.graph.weights(ui);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const Vector diff = (x.row(i) - x.row(static_cast<Eigen::Index>(nb[k]))).transpose();
      e += w[k] * diff.dot(c * diff);
    }
    per_node[static_cast<std::size_t>(i)] = e;
  }
  double total = 0.0;
  for (double e : per_node) total += e;
  return total;
}

FeatureMatrix energy_gradient(const QuadraticEnergyModel& model, const FeatureMatrix& x) {
  check_shape(model, x);
  const Matrix& c = model.compat.realized();
  FeatureMatrix g = 2.0 * (x - model.observed);
  for (NodeIndex i = 0; i < model.num_nodes(); ++i) {
    const auto nb = model.graph.neighbors(i);
    const auto w = model.graph.weights(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(nb[k]);
      const Vector push = 2.0 * w[k] * (c * (x.row(ii) - x.row(jj)).transpose());
      g.row(ii) += push.transpose();
      g.row(jj) -= push.transpose();
    }
  }
  return g;
}

Eigen::SparseMatrix<double> assemble_system(const QuadraticEnergyModel& model) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  const auto n = static_cast<Eigen::Index>(model.num_nodes());
  const Matrix& c = model.compat.realized();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n * d + 4 * static_cast<Eigen::Index>(model.graph.num_edges()) * d * d));
  for (Eigen::Index r = 0; r < n * d; ++r) trip.emplace_back(r, r, 1.0);

  auto add_block = [&](Eigen::Index bi, Eigen::Index bj, double scale) {
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = 0; b < d; ++b) {
        if (c(a, b) != 0.0) trip.emplace_back(bi * d + a, bj * d + b, scale * c(a, b));
      }
    }
  };
  for (NodeIndex i = 0; i < model.num_nodes(); ++i) {
    const auto nb = model.graph.neighbors(i);
    const auto w = model.graph.weights(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (w[k] == 0.0) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(nb[k]);
      add_block(ii, ii, w[k]);
      add_block(jj, jj, w[k]);
      add_block(ii, jj, -w[k]);
      add_block(jj, ii, -w[k]);
    }
  }
  Eigen::SparseMatrix<double> a(n * d, n * d);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

namespace {

Vector stack(const FeatureMatrix& m) {
  Vector v(m.size());
  Eigen::Map<FeatureMatrix>(v.data(), m.rows(), m.cols()) = m;
  return v;
}

FeatureMatrix unstack(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const FeatureMatrix>(v.data(), rows, cols);
}

}  // namespace

double system_residual(const QuadraticEnergyModel& model, const FeatureMatrix& x) {
  check_shape(model, x);
  const Vector r = assemble_system(model) * stack(x) - stack(model.observed);
  return r.size() == 0 ? 0.0 : r.cwiseAbs().maxCoeff();
}

FeatureMatrix solve_exact(const QuadraticEnergyModel& model, const ExactSolveOptions& options) {
  const Eigen::Index rows = model.observed.rows();
  const Eigen::Index cols = model.observed.cols();
  if (rows == 0 || cols == 0) return model.observed;

  const auto a = assemble_system(model);
  const Vector z = stack(model.observed);
  Vector x;
  if (static_cast<std::size_t>(z.size()) <= options.dense_limit) {
    const Matrix dense(a);
    Eigen::LLT<Matrix> llt(dense);
    if (llt.info() != Eigen::Success) throw SolverError("system matrix is not positive definite", INFINITY);
    x = llt.solve(z);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(options.cg_tolerance);
    cg.setMaxIterations(static_cast<Eigen::Index>(options.max_iterations ? options.max_iterations : 10 * z.size()));
    cg.compute(a);
    x = cg.solveWithGuess(z, z);
  }

  const double z_inf = z.cwiseAbs().maxCoeff();
  const double residual = (a * x - z).cwiseAbs().maxCoeff();
  const double bound = 1e-8 * (1.0 + z_inf);
  if (!(residual <= bound)) {
    throw SolverError("exact solve residual " + std::to_string(residual) + " exceeds " + std::to_string(bound),
                      residual);
  }
  return unstack(x, rows, cols);
}

double dirichlet_energy(const NeighborGraph& graph, const Vector& h) {
  if (!graph.has_weights()) throw InvariantError("Dirichlet energy needs edge weights");
  if (static_cast<std::size_t>(h.size()) != graph.num_nodes()) throw ShapeError("signal length does not match graph");
  double total = 0.0;
  for (NodeIndex i = 0; i < graph.num_nodes(); ++i) {
    const auto nb = graph.neighbors(i);
    const auto w = graph.weights(i);
    const auto ii = static_cast<Eigen::Index>(i);
    double degree = 0.0;
    double mix = 0.0;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      degree += w[k];
      mix += w[k] * h(static_cast<Eigen::Index>(nb[k]));
    }
    // D^{-1} is undefined without neighbors; such rows are the identity row.
    const double lh = degree > 0.0 ? h(ii) - mix / degree : h(ii);
    total += h(ii) * lh;
  }
  return total;
}

double laplacian_asymmetry(const NeighborGraph& graph) {
  if (!graph.has_weights()) throw InvariantError("Laplacian needs edge weights");
  std::vector<double> degree(graph.num_nodes(), 0.0);
  for (NodeIndex i = 0; i < graph.num_nodes(); ++i) {
    for (double w : graph.weights(i)) degree[i] += w;
  }
  auto entry = [&](NodeIndex i, NodeIndex j) {
    const auto nb = graph.neighbors(i);
    const auto w = graph.weights(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] == j) return w[k] / degree[i];
    }
    return 0.0;
  };
  double worst = 0.0;
  for (NodeIndex i = 0; i < graph.num_nodes(); ++i) {
    if (degree[i] <= 0.0) continue;
    for (NodeIndex j : graph.neighbors(i)) worst = std::max(worst, std::abs(entry(i, j) - entry(j, i)));
  }
  return worst;
}

double dirichlet_energy(const NeighborGraph& graph, const FeatureMatrix& h) {
  double total = 0.0;
  for (Eigen::Index c = 0; c < h.cols(); ++c) total += dirichlet_energy(graph, Vector(h.col(c)));
  return total;
}

}  // namespace crfconv

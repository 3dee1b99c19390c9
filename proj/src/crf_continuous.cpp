#include "crfconv/crf_continuous.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <limits>

#include "crf_internal.hpp"

namespace crfconv {

SimilarityField::SimilarityField(NeighborGraph normalized) : graph_(std::move(normalized)) {
  if (!graph_.has_weights()) throw InvariantError("similarity field needs edge weights");
  for (NodeIndex i = 0; i < graph_.num_nodes(); ++i) {
    if (graph_.degree(i) == 0) continue;
    double sum = 0.0;
    for (double w : graph_.weights(i)) sum += w;
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InvariantError("similarities of node " + std::to_string(i) + " sum to " + std::to_string(sum) +
                           ", expected 1");
    }
  }
}

SimilarityField SimilarityField::normalize(const NeighborGraph& raw) {
  if (!raw.has_weights()) throw InvariantError("normalization needs raw edge similarities");
  std::vector<double> w(raw.flat_weights().begin(), raw.flat_weights().end());
  for (NodeIndex i = 0; i < raw.num_nodes(); ++i) {
    if (raw.degree(i) == 0) continue;
    const std::size_t b = raw.edge_begin(i);
    double sum = 0.0;
    for (std::size_t e = b; e < b + raw.degree(i); ++e) sum += w[e];
    if (!(sum > 0.0)) throw InvariantError("node " + std::to_string(i) + " has neighbors but zero total similarity");
    for (std::size_t e = b; e < b + raw.degree(i); ++e) w[e] /= sum;
  }
  return SimilarityField(raw.with_weights(std::move(w)));
}

Schedule parse_schedule(std::string_view name) {
  if (name == "jacobi") return Schedule::Jacobi;
  if (name == "gauss-seidel" || name == "gauss_seidel") return Schedule::GaussSeidel;
  throw std::invalid_argument("unknown schedule '" + std::string(name) + "'");
}

const char* schedule_name(Schedule s) { return s == Schedule::Jacobi ? "jacobi" : "gauss-seidel"; }

ContinuousCrfState ContinuousCrfState::start(FeatureMatrix z) {
  ContinuousCrfState s;
  s.latent = z;
  s.observed = std::move(z);
  return s;
}

CompatibilityMatrix CrfConfig::compat_for(std::size_t d) const {
  if (!compat) return CompatibilityMatrix::identity(d);
  if (compat->dim() != d) {
    throw ShapeError("compatibility matrix is " + std::to_string(compat->dim()) + "x" + std::to_string(compat->dim()) +
                     " but features have width " + std::to_string(d));
  }
  return *compat;
}

namespace detail {

MessageOperator::MessageOperator(const CompatibilityMatrix& c) : compat(c.realized()), identity(c.is_identity()) {
  const auto d = compat.rows();
  if (identity) {
    update = 0.5 * Matrix::Identity(d, d);
  } else {
    const Matrix a = Matrix::Identity(d, d) + compat;
    const Matrix inv = a.llt().solve(Matrix::Identity(d, d));
    update = 0.5 * (inv + inv.transpose());
  }
}

void update_node(const MessageOperator& op, const SimilarityField& sim, const FeatureMatrix& z,
                 const FeatureMatrix& source, NodeIndex i, Eigen::Ref<Eigen::RowVectorXd> out) {
  const auto nb = sim.neighbors(i);
  const auto w = sim.weights(i);
  Eigen::RowVectorXd msg = Eigen::RowVectorXd::Zero(z.cols());
  for (std::size_t k = 0; k < nb.size(); ++k) msg += w[k] * source.row(static_cast<Eigen::Index>(nb[k]));
  const auto ii = static_cast<Eigen::Index>(i);
  if (op.identity) {
    out = 0.5 * (z.row(ii) + msg);
  } else {
    // Row-vector form of x = (I+C)^{-1} (z + C m); both matrices are symmetric.
    out = (z.row(ii) + msg * op.compat) * op.update;
  }
}

FeatureMatrix advance(const FeatureMatrix& z, const FeatureMatrix& x, const SimilarityField& sim,
                      const MessageOperator& op, Schedule schedule) {
  const auto n = static_cast<std::ptrdiff_t>(sim.num_nodes());
  if (schedule == Schedule::GaussSeidel) {
    FeatureMatrix next = x;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      Eigen::RowVectorXd row(z.cols());
      update_node(op, sim, z, next, static_cast<NodeIndex>(i), row);
      next.row(i) = row;
    }
    return next;
  }
  FeatureMatrix next(x.rows(), x.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) update_node(op, sim, z, x, static_cast<NodeIndex>(i), next.row(i));
  return next;
}

double max_abs_diff(const FeatureMatrix& a, const FeatureMatrix& b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

}  // namespace detail

namespace {

void check_state(const ContinuousCrfState& state, const SimilarityField& sim, std::size_t d) {
  if (static_cast<std::size_t>(state.observed.rows()) != sim.num_nodes()) {
    throw ShapeError("state has " + std::to_string(state.observed.rows()) + " nodes, similarity field has " +
                     std::to_string(sim.num_nodes()));
  }
  if (state.latent.rows() != state.observed.rows() || state.latent.cols() != state.observed.cols()) {
    throw ShapeError("latent and observed features differ in shape");
  }
  if (static_cast<std::size_t>(state.observed.cols()) != d) throw ShapeError("feature width mismatch");
}

}  // namespace

SimilarityField pairwise_similarity(const FeatureMatrix& guide, const NeighborGraph& graph,
                                    const PointwiseTransform& projection) {
  if (static_cast<std::size_t>(guide.rows()) != graph.num_nodes()) {
    throw ShapeError("guide features do not match graph size");
  }
  const FeatureMatrix g = projection.apply(guide);
  std::vector<double> w(graph.num_edges());
  const auto n = static_cast<std::ptrdiff_t>(graph.num_nodes());

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ui = static_cast<NodeIndex>(i);
    const auto nb = graph.neighbors(ui);
    if (nb.empty()) continue;
    const std::size_t b = graph.edge_begin(ui);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nb.size(); ++k) {
      w[b + k] = -(g.row(i) - g.row(static_cast<Eigen::Index>(nb[k]))).squaredNorm();
      top = std::max(top, w[b + k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      w[b + k] = std::exp(w[b + k] - top);
      sum += w[b + k];
    }
    for (std::size_t k = 0; k < nb.size(); ++k) w[b + k] /= sum;
  }
  return SimilarityField(graph.with_weights(std::move(w)));
}

QuadraticEnergyModel normalized_energy_model(const SimilarityField& sim, const CompatibilityMatrix& compat,
                                             const FeatureMatrix& observed) {
  std::vector<double> half(sim.graph().flat_weights().begin(), sim.graph().flat_weights().end());
  for (double& v : half) v *= 0.5;
  return QuadraticEnergyModel(sim.graph().with_weights(std::move(half)), compat, observed);
}

ContinuousCrfState crf_step(const ContinuousCrfState& state, const SimilarityField& sim, const CrfConfig& cfg) {
  const auto d = static_cast<std::size_t>(state.observed.cols());
  check_state(state, sim, d);
  const CompatibilityMatrix compat = cfg.compat_for(d);
  const detail::MessageOperator op(compat);

  ContinuousCrfState next = state;
  next.latent = detail::advance(state.observed, state.latent, sim, op, cfg.schedule);
  next.steps += 1;
  if (cfg.record_energy) {
    next.energy_trace.push_back(evaluate_energy(normalized_energy_model(sim, compat, state.observed), next.latent));
  }
  return next;
}

ContinuousCrfState run_crf(ContinuousCrfState state, const SimilarityField& sim, const CrfConfig& cfg) {
  const auto d = static_cast<std::size_t>(state.observed.cols());
  check_state(state, sim, d);
  if (std::isnan(cfg.convergence_tol) || cfg.convergence_tol < 0.0) {
    throw InvariantError("convergence tolerance must be >= 0");
  }
  const CompatibilityMatrix compat = cfg.compat_for(d);
  const detail::MessageOperator op(compat);
  std::optional<QuadraticEnergyModel> model;
  if (cfg.record_energy) model.emplace(normalized_energy_model(sim, compat, state.observed));

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    FeatureMatrix next = detail::advance(state.observed, state.latent, sim, op, cfg.schedule);
    if (cfg.convergence_tol > 0.0 && detail::max_abs_diff(next, state.latent) <= cfg.convergence_tol) break;
    state.latent = std::move(next);
    state.steps += 1;
    if (model) state.energy_trace.push_back(evaluate_energy(*model, state.latent));
  }
  return state;
}

CrfConvolution crf_convolve(const FeatureMatrix& input, const NeighborGraph& graph, const PointwiseTransform& unary,
                            const PointwiseTransform& projection, const FeatureMatrix& guide, const CrfConfig& cfg) {
  if (static_cast<std::size_t>(input.rows()) != graph.num_nodes()) throw ShapeError("input does not match graph size");
  FeatureMatrix z = unary.apply(input);
  SimilarityField sim = pairwise_similarity(guide, graph, projection);
  ContinuousCrfState state = run_crf(ContinuousCrfState::start(std::move(z)), sim, cfg);
  FeatureMatrix out = cfg.readout.apply(state.latent);
  return CrfConvolution{std::move(out), std::move(state), std::move(sim)};
}

std::vector<Matrix> mean_field_covariance(const SimilarityField& sim, const CompatibilityMatrix& compat) {
  const auto d = static_cast<Eigen::Index>(compat.dim());
  const Matrix isolated = 0.5 * Matrix::Identity(d, d);
  Matrix connected;
  if (compat.is_identity()) {
    connected = 0.25 * Matrix::Identity(d, d);
  } else {
    const Matrix inv = (Matrix::Identity(d, d) + compat.realized()).llt().solve(Matrix::Identity(d, d));
    connected = 0.25 * (inv + inv.transpose());
  }
  std::vector<Matrix> out(sim.num_nodes());
  for (NodeIndex i = 0; i < sim.num_nodes(); ++i) out[i] = sim.graph().degree(i) ? connected : isolated;
  return out;
}

namespace {

// I + sum_j w_ij for node i of an arbitrary model.
Matrix node_precision(const QuadraticEnergyModel& model, NodeIndex i) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  double total = 0.0;
  for (double s : model.graph.weights(i)) total += s;
  return Matrix::Identity(d, d) + total * model.compat.realized();
}

}  // namespace

std::vector<Matrix> mean_field_covariance(const QuadraticEnergyModel& model) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  std::vector<Matrix> out(model.num_nodes());
  for (NodeIndex i = 0; i < model.num_nodes(); ++i) {
    const Matrix inv = node_precision(model, i).llt().solve(Matrix::Identity(d, d));
    out[i] = 0.25 * (inv + inv.transpose());
  }
  return out;
}

FeatureMatrix coordinate_descent_step(const QuadraticEnergyModel& model, const FeatureMatrix& x, Schedule schedule) {
  if (x.rows() != model.observed.rows() || x.cols() != model.observed.cols()) throw ShapeError("iterate shape mismatch");
  const Matrix& c = model.compat.realized();
  const auto d = static_cast<Eigen::Index>(model.dim());
  const FeatureMatrix prev = x;
  FeatureMatrix next = x;
  for (NodeIndex i = 0; i < model.num_nodes(); ++i) {
    const FeatureMatrix& read = schedule == Schedule::Jacobi ? prev : next;
    const auto nb = model.graph.neighbors(i);
    const auto w = model.graph.weights(i);
    Matrix lhs = Matrix::Identity(d, d);
    Vector rhs = model.observed.row(static_cast<Eigen::Index>(i)).transpose();
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const Matrix w_ij = w[k] * c;
      lhs += w_ij;
      rhs += w_ij * read.row(static_cast<Eigen::Index>(nb[k])).transpose();
    }
    next.row(static_cast<Eigen::Index>(i)) = lhs.partialPivLu().solve(rhs).transpose();
  }
  return next;
}

FeatureMatrix mean_field_mean_step(const QuadraticEnergyModel& model, const FeatureMatrix& mu, Schedule schedule) {
  if (mu.rows() != model.observed.rows() || mu.cols() != model.observed.cols()) throw ShapeError("mean shape mismatch");
  const Matrix& c = model.compat.realized();
  FeatureMatrix out = mu;
  const FeatureMatrix frozen = mu;
  for (NodeIndex i = 0; i < model.num_nodes(); ++i) {
    const FeatureMatrix& others = schedule == Schedule::Jacobi ? frozen : out;
    const auto ii = static_cast<Eigen::Index>(i);
    // Stationarity of the mu_i-terms of KL(Q||P): precision * mu_i = potential.
    const Matrix precision = 2.0 * node_precision(model, i);
    Vector potential = 2.0 * model.observed.row(ii).transpose();
    const auto nb = model.graph.neighbors(i);
    const auto w = model.graph.weights(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      potential += 2.0 * w[k] * (c * others.row(static_cast<Eigen::Index>(nb[k])).transpose());
    }
    out.row(ii) = precision.llt().solve(potential).transpose();
  }
  return out;
}

double covariance_objective(const QuadraticEnergyModel& model, const std::vector<Matrix>& sigma) {
  if (sigma.size() != model.num_nodes()) throw ShapeError("one covariance per node expected");
  double total = 0.0;
  for (NodeIndex i = 0; i < model.num_nodes(); ++i) {
    Eigen::LLT<Matrix> llt(sigma[i]);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    total += (sigma[i] * node_precision(model, i)).trace() - 0.5 * log_det;
  }
  return total;
}

FeatureMatrix decode_level(const PointCloud& coarse, const PointCloud& fine, const PointwiseTransform& unary,
                           const PointwiseTransform& projection, const CrfConfig& cfg, const DecodeOptions& options) {
  if (coarse.empty() || fine.empty()) throw std::invalid_argument("decode_level needs non-empty clouds");
  const FeatureMatrix upsampled = knn_interpolate(coarse, fine.positions(), options.interpolation_k);
  const NeighborGraph graph = knn_graph(fine, options.graph_k);
  const auto conv = crf_convolve(upsampled, graph, unary, projection, fine.features(), cfg);
  FeatureMatrix out(conv.output.rows(), conv.output.cols() + fine.features().cols());
  out << conv.output, fine.features();
  return out;
}

}  // namespace crfconv

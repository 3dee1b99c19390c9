#include "crfconv/crf_discrete.hpp"

#include <cmath>

namespace crfconv {

void check_simplex_rows(const FeatureMatrix& m, double tolerance, std::string_view what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (!m.row(i).allFinite() || (m.row(i).array() < 0.0).any()) {
      throw InvariantError(std::string(what) + " row " + std::to_string(i + 1) + " has a negative or non-finite entry");
    }
    const double sum = m.row(i).sum();
    if (std::abs(sum - 1.0) > tolerance) {
      throw InvariantError(std::string(what) + " row " + std::to_string(i + 1) + " sums to " + std::to_string(sum) +
                           ", expected 1");
    }
  }
}

LabelField::LabelField(FeatureMatrix p, double tolerance) : LabelField(p, p, tolerance) {}

LabelField::LabelField(FeatureMatrix p, FeatureMatrix q, double tolerance) : p_(std::move(p)), q_(std::move(q)) {
  if (p_.rows() != q_.rows() || p_.cols() != q_.cols()) throw ShapeError("unary and posterior shapes differ");
  check_simplex_rows(p_, tolerance, "probability");
  check_simplex_rows(q_, tolerance, "posterior");
}

std::vector<std::size_t> LabelField::hard_labels() const {
  std::vector<std::size_t> out(num_nodes(), 0);
  for (Eigen::Index i = 0; i < q_.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index l = 1; l < q_.cols(); ++l) {
      if (q_(i, l) > q_(i, best)) best = l;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

KernelMixture KernelMixture::unit() { return KernelMixture{{PointwiseTransform::identity()}, {1.0}}; }

KernelMixture KernelMixture::from_transforms(const NamedTransforms& transforms) {
  KernelMixture mix;
  for (std::size_t m = 0;; ++m) {
    auto t = find_transform(transforms, "kernel" + std::to_string(m));
    if (!t) break;
    mix.projections.push_back(std::move(*t));
  }
  if (mix.projections.empty()) throw std::invalid_argument("kernel file defines no 'kernel0' component");
  if (auto mixing = find_transform(transforms, "mixture")) {
    const auto& layers = mixing->layers();
    if (layers.size() != 1 || layers[0].weight.rows() != 1 ||
        static_cast<std::size_t>(layers[0].weight.cols()) != mix.projections.size()) {
      throw ShapeError("'mixture' must be one linear stage mapping " + std::to_string(mix.projections.size()) +
                       " components to 1 output");
    }
    for (Eigen::Index m = 0; m < layers[0].weight.cols(); ++m) mix.weights.push_back(layers[0].weight(0, m));
  } else {
    mix.weights.assign(mix.projections.size(), 1.0);
  }
  return mix;
}

bool KernelMixture::has_negative_weights() const {
  for (double w : weights) {
    if (w < 0.0) return true;
  }
  return false;
}

std::vector<double> kernel_weights(const FeatureMatrix& features, const NeighborGraph& graph,
                                   const KernelMixture& mix) {
  if (mix.projections.size() != mix.weights.size()) throw ShapeError("kernel mixture weights do not match components");
  if (static_cast<std::size_t>(features.rows()) != graph.num_nodes()) throw ShapeError("features do not match graph");
  for (double w : mix.weights) {
    if (!std::isfinite(w)) throw InvariantError("kernel mixture weights must be finite");
  }
  std::vector<FeatureMatrix> projected;
  projected.reserve(mix.projections.size());
  for (const auto& p : mix.projections) projected.push_back(p.apply(features));

  std::vector<double> out(graph.num_edges(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(graph.num_nodes());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ui = static_cast<NodeIndex>(i);
    const auto nb = graph.neighbors(ui);
    const std::size_t b = graph.edge_begin(ui);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      double w = 0.0;
      for (std::size_t m = 0; m < projected.size(); ++m) {
        const auto& f = projected[m];
        w += mix.weights[m] * std::exp(-(f.row(i) - f.row(static_cast<Eigen::Index>(nb[k]))).squaredNorm());
      }
      out[b + k] = w;
    }
  }
  return out;
}

LabelCompatibility::LabelCompatibility(Matrix c) : c_(std::move(c)) {
  if (c_.rows() != c_.cols()) throw ShapeError("label compatibility must be square");
  if (!c_.allFinite()) throw InvariantError("label compatibility contains NaN or Inf");
}

LabelCompatibility LabelCompatibility::identity(std::size_t labels) {
  const auto l = static_cast<Eigen::Index>(labels);
  return LabelCompatibility(Matrix::Identity(l, l));
}

LabelCompatibility LabelCompatibility::potts_complement(std::size_t labels) {
  const auto l = static_cast<Eigen::Index>(labels);
  return LabelCompatibility(Matrix::Ones(l, l) - Matrix::Identity(l, l));
}

LabelCompatibility LabelCompatibility::from_matrix(Matrix c) { return LabelCompatibility(std::move(c)); }

LabelCompatibility LabelCompatibility::preset(std::string_view name, std::size_t labels) {
  if (name == "identity") return identity(labels);
  if (name == "potts-complement" || name == "potts") return potts_complement(labels);
  throw std::invalid_argument("unknown label compatibility preset '" + std::string(name) + "'");
}

Eigen::RowVectorXd softmax_log_unary(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                                     const Eigen::Ref<const Eigen::RowVectorXd>& shift) {
  Eigen::RowVectorXd logits = p.array().max(kUnaryFloor).log().matrix() - shift;
  const double top = logits.maxCoeff();
  logits = (logits.array() - top).exp().matrix();
  return logits / logits.sum();
}

LabelField discrete_crf_step(const LabelField& field, const NeighborGraph& graph, std::span<const double> weights,
                             const LabelCompatibility& compat) {
  if (graph.num_nodes() != field.num_nodes()) throw ShapeError("label field does not match graph size");
  if (weights.size() != graph.num_edges()) throw ShapeError("one kernel weight per edge expected");
  if (compat.num_labels() != field.num_labels()) throw ShapeError("label compatibility does not match label count");

  const FeatureMatrix& q = field.posterior();
  const FeatureMatrix& p = field.unary();
  const Matrix& c = compat.matrix();
  FeatureMatrix next(q.rows(), q.cols());
  const auto n = static_cast<std::ptrdiff_t>(graph.num_nodes());

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ui = static_cast<NodeIndex>(i);
    const auto nb = graph.neighbors(ui);
    const std::size_t b = graph.edge_begin(ui);
    Eigen::RowVectorXd msg = Eigen::RowVectorXd::Zero(q.cols());
    for (std::size_t k = 0; k < nb.size(); ++k) msg += weights[b + k] * q.row(static_cast<Eigen::Index>(nb[k]));
    // Row form of C m with m a column vector: (C m)^T = m^T C^T.
    const Eigen::RowVectorXd shift = msg * c.transpose();
    next.row(i) = softmax_log_unary(p.row(i), shift);
  }
  return LabelField(p, std::move(next));
}

LabelField discrete_crf_infer(const FeatureMatrix& p, const FeatureMatrix& features, const NeighborGraph& graph,
                              const KernelMixture& mix, const LabelCompatibility& compat, std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("discrete CRF needs at least one step");
  const auto w = kernel_weights(features, graph, mix);
  LabelField field(p);
  for (std::size_t t = 0; t < steps; ++t) field = discrete_crf_step(field, graph, w, compat);
  return field;
}

}  // namespace crfconv

#include <vector>

#include "crf_internal.hpp"
#include "crfconv/crf_continuous.hpp"

namespace crfconv {

CrfGradients crf_gradients(const FeatureMatrix& input, const NeighborGraph& graph, const PointwiseTransform& unary,
                           const PointwiseTransform& projection, const FeatureMatrix& guide, const CrfConfig& cfg,
                           const FeatureMatrix& upstream) {
  if (cfg.schedule != Schedule::Jacobi) {
    throw UnsupportedConfiguration("gradients are only available for the jacobi schedule");
  }
  if (cfg.convergence_tol != 0.0) {
    throw UnsupportedConfiguration("gradients unroll a fixed step count; set convergence_tol to 0");
  }
  if (static_cast<std::size_t>(input.rows()) != graph.num_nodes()) throw ShapeError("input does not match graph size");

  // Forward pass, keeping every iterate.
  const auto unary_trace = unary.forward(input);
  const FeatureMatrix& z = unary_trace.output;
  const auto proj_trace = projection.forward(guide);
  const FeatureMatrix& g = proj_trace.output;
  const SimilarityField sim = pairwise_similarity(guide, graph, projection);

  const auto d = static_cast<std::size_t>(z.cols());
  const CompatibilityMatrix compat = cfg.compat_for(d);
  const detail::MessageOperator op(compat);
  const Matrix& c = op.compat;
  const Matrix& u = op.update;

  if (upstream.rows() != z.rows() || upstream.cols() != z.cols()) throw ShapeError("upstream cotangent shape mismatch");

  const std::size_t n = graph.num_nodes();
  const std::size_t steps = cfg.steps;
  std::vector<FeatureMatrix> h{z};
  std::vector<FeatureMatrix> msg;  // sum_j s_ij h_j^{t-1}
  h.reserve(steps + 1);
  msg.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    FeatureMatrix m = FeatureMatrix::Zero(z.rows(), z.cols());
    for (NodeIndex i = 0; i < n; ++i) {
      const auto nb = sim.neighbors(i);
      const auto w = sim.weights(i);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        m.row(static_cast<Eigen::Index>(i)) += w[k] * h.back().row(static_cast<Eigen::Index>(nb[k]));
      }
    }
    h.push_back((z + m * c) * u);
    msg.push_back(std::move(m));
  }

  // Backward pass. Row form: H^t = V^t U, V^t = Z + M^t C, M^t = S H^{t-1}.
  FeatureMatrix h_bar = upstream;
  const FeatureMatrix& last = h.back();
  for (Eigen::Index i = 0; i < h_bar.rows(); ++i) {
    for (Eigen::Index j = 0; j < h_bar.cols(); ++j) h_bar(i, j) *= cfg.readout.derivative(last(i, j));
  }

  FeatureMatrix z_bar = FeatureMatrix::Zero(z.rows(), z.cols());
  Matrix c_bar = Matrix::Zero(c.rows(), c.cols());
  Matrix u_bar = Matrix::Zero(u.rows(), u.cols());
  std::vector<double> s_bar(graph.num_edges(), 0.0);

  for (std::size_t t = steps; t-- > 0;) {
    const FeatureMatrix v = z + msg[t] * c;
    const FeatureMatrix v_bar = h_bar * u.transpose();
    u_bar += v.transpose() * h_bar;
    z_bar += v_bar;
    const FeatureMatrix m_bar = v_bar * c.transpose();
    c_bar += msg[t].transpose() * v_bar;

    FeatureMatrix prev_bar = FeatureMatrix::Zero(z.rows(), z.cols());
    for (NodeIndex i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto nb = sim.neighbors(i);
      const auto w = sim.weights(i);
      const std::size_t b = graph.edge_begin(i);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const auto jj = static_cast<Eigen::Index>(nb[k]);
        s_bar[b + k] += m_bar.row(ii).dot(h[t].row(jj));
        prev_bar.row(jj) += w[k] * m_bar.row(ii);
      }
    }
    h_bar = std::move(prev_bar);
  }
  z_bar += h_bar;  // h^0 = z

  CrfGradients out;

  if (!compat.is_identity()) {
    c_bar -= u.transpose() * u_bar * u.transpose();
    out.compat_factor = compat.factor() * (c_bar + c_bar.transpose());
  }

  // Softmax and squared-distance backward.
  FeatureMatrix g_bar = FeatureMatrix::Zero(g.rows(), g.cols());
  for (NodeIndex i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto nb = sim.neighbors(i);
    const auto w = sim.weights(i);
    const std::size_t b = graph.edge_begin(i);
    double dot = 0.0;
    for (std::size_t k = 0; k < nb.size(); ++k) dot += w[k] * s_bar[b + k];
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const double logit_bar = w[k] * (s_bar[b + k] - dot);
      const auto jj = static_cast<Eigen::Index>(nb[k]);
      const Eigen::RowVectorXd push = -2.0 * logit_bar * (g.row(ii) - g.row(jj));
      g_bar.row(ii) += push;
      g_bar.row(jj) -= push;
    }
  }

  auto proj_grad = projection.backward(proj_trace, g_bar);
  out.guide = std::move(proj_grad.input);
  out.projection = std::move(proj_grad.layers);

  auto unary_grad = unary.backward(unary_trace, z_bar);
  out.input = std::move(unary_grad.input);
  out.unary = std::move(unary_grad.layers);
  return out;
}

}  // namespace crfconv

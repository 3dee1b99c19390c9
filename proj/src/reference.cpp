#include "crfconv/reference.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <utility>

namespace crfconv::reference {

NeighborGraph knn_graph(const PointCloud& cloud, std::size_t k) {
  const std::size_t n = cloud.size();
  std::vector<std::vector<NodeIndex>> lists(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, NodeIndex>> cand;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double t = cloud.positions()(static_cast<Eigen::Index>(i), a) - cloud.positions()(static_cast<Eigen::Index>(j), a);
        d2 += t * t;
      }
      cand.emplace_back(d2, j);
    }
    std::sort(cand.begin(), cand.end());
    for (std::size_t r = 0; r < std::min(k, cand.size()); ++r) lists[i].push_back(cand[r].second);
  }
  return NeighborGraph(lists);
}

std::vector<double> similarity_weights(const FeatureMatrix& projected, const NeighborGraph& graph) {
  std::vector<double> w(graph.num_edges());
  for (NodeIndex i = 0; i < graph.num_nodes(); ++i) {
    const auto nb = graph.neighbors(i);
    const std::size_t b = graph.edge_begin(i);
    double top = -INFINITY;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      double d2 = 0.0;
      for (Eigen::Index a = 0; a < projected.cols(); ++a) {
        const double t = projected(static_cast<Eigen::Index>(i), a) - projected(static_cast<Eigen::Index>(nb[k]), a);
        d2 += t * t;
      }
      w[b + k] = -d2;
      top = std::max(top, -d2);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      w[b + k] = std::exp(w[b + k] - top);
      sum += w[b + k];
    }
    for (std::size_t k = 0; k < nb.size(); ++k) w[b + k] /= sum;
  }
  return w;
}

FeatureMatrix crf_jacobi_step(const FeatureMatrix& z, const FeatureMatrix& x, const SimilarityField& sim,
                              const Matrix& compat) {
  const Eigen::Index d = z.cols();
  const Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(d, d) + compat);
  FeatureMatrix out(z.rows(), d);
  for (NodeIndex i = 0; i < sim.num_nodes(); ++i) {
    const auto nb = sim.neighbors(i);
    const auto w = sim.weights(i);
    Vector m = Vector::Zero(d);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      for (Eigen::Index a = 0; a < d; ++a) m(a) += w[k] * x(static_cast<Eigen::Index>(nb[k]), a);
    }
    const Vector rhs = z.row(static_cast<Eigen::Index>(i)).transpose() + compat * m;
    out.row(static_cast<Eigen::Index>(i)) = lu.solve(rhs).transpose();
  }
  return out;
}

FeatureMatrix diffusion_step(const FeatureMatrix& h, const NeighborGraph& graph, double c) {
  FeatureMatrix out = h;
  for (NodeIndex i = 0; i < graph.num_nodes(); ++i) {
    const auto nb = graph.neighbors(i);
    const auto w = graph.weights(i);
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index a = 0; a < h.cols(); ++a) {
      double lap = 0.0;
      for (std::size_t k = 0; k < nb.size(); ++k) lap += w[k] * (h(ii, a) - h(static_cast<Eigen::Index>(nb[k]), a));
      out(ii, a) = h(ii, a) - c * lap;
    }
  }
  return out;
}

FeatureMatrix discrete_crf_step(const FeatureMatrix& p, const FeatureMatrix& q, const NeighborGraph& graph,
                                std::span<const double> weights, const Matrix& compat) {
  const Eigen::Index labels = p.cols();
  FeatureMatrix out(p.rows(), labels);
  for (NodeIndex i = 0; i < graph.num_nodes(); ++i) {
    const auto nb = graph.neighbors(i);
    const std::size_t b = graph.edge_begin(i);
    const auto ii = static_cast<Eigen::Index>(i);
    std::vector<double> m(static_cast<std::size_t>(labels), 0.0);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      for (Eigen::Index l = 0; l < labels; ++l) {
        m[static_cast<std::size_t>(l)] += weights[b + k] * q(static_cast<Eigen::Index>(nb[k]), l);
      }
    }
    std::vector<double> logit(static_cast<std::size_t>(labels));
    double top = -INFINITY;
    for (Eigen::Index l = 0; l < labels; ++l) {
      double shift = 0.0;
      for (Eigen::Index r = 0; r < labels; ++r) shift += compat(l, r) * m[static_cast<std::size_t>(r)];
      logit[static_cast<std::size_t>(l)] = std::log(std::max(p(ii, l), 1e-12)) - shift;
      top = std::max(top, logit[static_cast<std::size_t>(l)]);
    }
    double sum = 0.0;
    for (auto& v : logit) {
      v = std::exp(v - top);
      sum += v;
    }
    for (Eigen::Index l = 0; l < labels; ++l) out(ii, l) = logit[static_cast<std::size_t>(l)] / sum;
  }
  return out;
}

}  // namespace crfconv::reference

#include "crfconv/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace crfconv {

namespace {

void require_finite(const auto& m, const char* what) {
  if (!m.allFinite()) throw InvariantError(std::string(what) + " contains NaN or Inf");
}

double squared_distance(const PositionMatrix& p, Eigen::Index i, Eigen::Index j) {
  const double dx = p(i, 0) - p(j, 0);
  const double dy = p(i, 1) - p(j, 1);
  const double dz = p(i, 2) - p(j, 2);
  return dx * dx + dy * dy + dz * dz;
}

using Candidate = std::pair<double, NodeIndex>;  // (squared distance, index)

// The `count` nearest other points of `node`, ascending by (distance, index).
std::vector<Candidate> nearest_candidates(const PositionMatrix& p, NodeIndex node, std::size_t count) {
  const std::size_t n = static_cast<std::size_t>(p.rows());
  std::vector<Candidate> all;
  all.reserve(n);
  for (NodeIndex j = 0; j < n; ++j) {
    if (j == node) continue;
    all.emplace_back(squared_distance(p, static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(j)), j);
  }
  count = std::min(count, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count), all.end());
  all.resize(count);
  return all;
}

}  // namespace

PointCloud::PointCloud(PositionMatrix positions, FeatureMatrix features)
    : positions_(std::move(positions)), features_(std::move(features)) {
  if (features_.rows() != positions_.rows()) {
    throw ShapeError("point cloud has " + std::to_string(positions_.rows()) + " positions but " +
                     std::to_string(features_.rows()) + " feature rows");
  }
  require_finite(positions_, "positions");
  require_finite(features_, "features");
}

PointCloud::PointCloud(PositionMatrix positions)
    : PointCloud(positions, FeatureMatrix(positions.rows(), 0)) {}

void PointCloud::set_features(FeatureMatrix features) {
  if (features.rows() != positions_.rows()) throw ShapeError("feature rows do not match point count");
  require_finite(features, "features");
  features_ = std::move(features);
}

NeighborGraph::NeighborGraph(const std::vector<std::vector<NodeIndex>>& lists) {
  offsets_.assign(1, 0);
  for (const auto& l : lists) {
    indices_.insert(indices_.end(), l.begin(), l.end());
    offsets_.push_back(indices_.size());
  }
  validate();
}

NeighborGraph::NeighborGraph(const std::vector<std::vector<NodeIndex>>& lists,
                             const std::vector<std::vector<double>>& weights)
    : NeighborGraph(lists) {
  if (weights.size() != lists.size()) throw ShapeError("edge weights do not match node count");
  weights_.reserve(indices_.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    if (weights[i].size() != lists[i].size()) {
      throw ShapeError("edge weights of node " + std::to_string(i) + " do not match its neighbor list");
    }
    weights_.insert(weights_.end(), weights[i].begin(), weights[i].end());
  }
  weighted_ = true;
  validate();
}

void NeighborGraph::validate() const {
  const std::size_t n = num_nodes();
  std::vector<std::size_t> seen(n, std::numeric_limits<std::size_t>::max());
  for (NodeIndex i = 0; i < n; ++i) {
    for (NodeIndex j : neighbors(i)) {
      if (j >= n) {
        throw InvariantError("neighbor index " + std::to_string(j) + " of node " + std::to_string(i) +
                             " is out of range");
      }
      if (j == i) throw InvariantError("self loop at node " + std::to_string(i));
      if (seen[j] == i) {
        throw InvariantError("duplicate neighbor " + std::to_string(j) + " at node " + std::to_string(i));
      }
      seen[j] = i;
    }
  }
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) throw InvariantError("edge weights must be finite and nonnegative");
  }
}

NeighborGraph NeighborGraph::with_weights(std::vector<double> flat_weights) const {
  if (flat_weights.size() != indices_.size()) throw ShapeError("edge weight count does not match edge count");
  NeighborGraph g = *this;
  g.weights_ = std::move(flat_weights);
  g.weighted_ = true;
  g.validate();
  return g;
}

NeighborGraph NeighborGraph::without_weights() const {
  NeighborGraph g = *this;
  g.weights_.clear();
  g.weighted_ = false;
  return g;
}

std::vector<std::vector<NodeIndex>> NeighborGraph::lists() const {
  std::vector<std::vector<NodeIndex>> out(num_nodes());
  for (NodeIndex i = 0; i < num_nodes(); ++i) {
    auto nb = neighbors(i);
    out[i].assign(nb.begin(), nb.end());
  }
  return out;
}

NeighborGraph dilated_knn_graph(const PointCloud& cloud, std::size_t k, std::size_t dilation) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  if (dilation == 0) throw std::invalid_argument("dilation must be at least 1");
  const auto& p = cloud.positions();
  const std::size_t n = cloud.size();
  std::vector<std::vector<NodeIndex>> lists(n);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n); ++s) {
    const auto i = static_cast<NodeIndex>(s);
    auto cand = nearest_candidates(p, i, k * dilation);
    auto& out = lists[i];
    for (std::size_t rank = dilation; rank <= cand.size(); rank += dilation) {
      out.push_back(cand[rank - 1].second);
    }
  }
  return NeighborGraph(lists);
}

NeighborGraph knn_graph(const PointCloud& cloud, std::size_t k) { return dilated_knn_graph(cloud, k, 1); }

NeighborGraph radius_graph(const PointCloud& cloud, double radius_sq) {
  if (!(radius_sq > 0.0)) throw std::invalid_argument("radius must be positive");
  const auto& p = cloud.positions();
  const std::size_t n = cloud.size();
  std::vector<std::vector<NodeIndex>> lists(n);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n); ++s) {
    const auto i = static_cast<NodeIndex>(s);
    std::vector<Candidate> within;
    for (NodeIndex j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d2 = squared_distance(p, s, static_cast<Eigen::Index>(j));
      if (d2 <= radius_sq) within.emplace_back(d2, j);
    }
    std::sort(within.begin(), within.end());
    for (const auto& c : within) lists[i].push_back(c.second);
  }
  return NeighborGraph(lists);
}

SampleIndex farthest_point_sample(const PointCloud& cloud, double ratio, NodeIndex seed_index) {
  const std::size_t n = cloud.size();
  if (n == 0) throw std::invalid_argument("farthest point sampling needs a non-empty cloud");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("sampling ratio must lie in (0, 1]");
  if (seed_index >= n) throw std::invalid_argument("seed index out of range");

  // ceil with a relative guard so that e.g. (2/3)*3 does not round up to 3.
  const double raw = ratio * static_cast<double>(n);
  auto count = static_cast<std::size_t>(std::ceil(raw - 1e-12 * raw));
  count = std::clamp<std::size_t>(count, 1, n);

  const auto& p = cloud.positions();
  SampleIndex out;
  out.ratio = ratio;
  out.selected.reserve(count);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);

  NodeIndex current = seed_index;
  for (std::size_t step = 0; step < count; ++step) {
    out.selected.push_back(current);
    taken[current] = true;
    if (step + 1 == count) break;

    for (NodeIndex j = 0; j < n; ++j) {
      min_d2[j] = std::min(min_d2[j],
                           squared_distance(p, static_cast<Eigen::Index>(current), static_cast<Eigen::Index>(j)));
    }
    NodeIndex best = n;
    for (NodeIndex j = 0; j < n; ++j) {
      if (taken[j]) continue;
      if (best == n || min_d2[j] > min_d2[best]) best = j;
    }
    current = best;
  }
  return out;
}

std::vector<InterpolationStencil> interpolation_stencils(const PositionMatrix& coarse,
                                                         const PositionMatrix& fine, std::size_t k) {
  if (coarse.rows() == 0) throw std::invalid_argument("interpolation needs a non-empty coarse cloud");
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  const auto n_coarse = static_cast<std::size_t>(coarse.rows());
  const auto n_fine = static_cast<std::size_t>(fine.rows());
  const std::size_t kk = std::min(k, n_coarse);
  std::vector<InterpolationStencil> stencils(n_fine);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n_fine); ++s) {
    std::vector<Candidate> cand;
    cand.reserve(n_coarse);
    for (NodeIndex j = 0; j < n_coarse; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double dx = fine(s, 0) - coarse(jj, 0);
      const double dy = fine(s, 1) - coarse(jj, 1);
      const double dz = fine(s, 2) - coarse(jj, 2);
      cand.emplace_back(dx * dx + dy * dy + dz * dz, j);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end());

    auto& st = stencils[static_cast<std::size_t>(s)];
    if (std::sqrt(cand.front().first) < kCoincidenceDistance) {
      st.sources = {cand.front().second};
      st.weights = {1.0};
      continue;
    }
    double total = 0.0;
    for (std::size_t r = 0; r < kk; ++r) {
      st.sources.push_back(cand[r].second);
      st.weights.push_back(1.0 / cand[r].first);
      total += st.weights.back();
    }
    for (double& w : st.weights) w /= total;
  }
  return stencils;
}

FeatureMatrix knn_interpolate(const PointCloud& coarse, const PositionMatrix& fine_positions, std::size_t k) {
  const auto stencils = interpolation_stencils(coarse.positions(), fine_positions, k);
  const auto& f = coarse.features();
  FeatureMatrix out = FeatureMatrix::Zero(fine_positions.rows(), f.cols());
  for (std::size_t i = 0; i < stencils.size(); ++i) {
    const auto& st = stencils[i];
    if (st.sources.size() == 1 && st.weights[0] == 1.0) {
      out.row(static_cast<Eigen::Index>(i)) = f.row(static_cast<Eigen::Index>(st.sources[0]));
      continue;
    }
    for (std::size_t r = 0; r < st.sources.size(); ++r) {
      out.row(static_cast<Eigen::Index>(i)) += st.weights[r] * f.row(static_cast<Eigen::Index>(st.sources[r]));
    }
  }
  return out;
}

std::vector<double> edge_distances(const PointCloud& cloud, const NeighborGraph& graph) {
  if (graph.num_nodes() != cloud.size()) throw ShapeError("graph does not match cloud size");
  std::vector<double> d;
  d.reserve(graph.num_edges());
  for (NodeIndex i = 0; i < graph.num_nodes(); ++i) {
    for (NodeIndex j : graph.neighbors(i)) {
      d.push_back(std::sqrt(
          squared_distance(cloud.positions(), static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
  }
  return d;
}

}  // namespace crfconv

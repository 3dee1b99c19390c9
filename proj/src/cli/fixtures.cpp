#include "cli/fixtures.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace crfconv::cli {

ClusterFixture three_cluster_cloud(std::size_t points, double noise, std::uint64_t seed) {
  static const double centers[3][3] = {{0.0, 0.0, 0.0}, {4.0, 0.0, 0.0}, {0.0, 4.0, 0.0}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> spread(0.0, 0.5);
  std::normal_distribution<double> jitter(0.0, 1.0);

  const auto n = static_cast<Eigen::Index>(points);
  PositionMatrix pos(n, 3);
  FeatureMatrix clean = FeatureMatrix::Zero(n, 3);
  FeatureMatrix noisy(n, 3);
  std::vector<std::size_t> truth(points);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(i % 3);
    truth[static_cast<std::size_t>(i)] = c;
    for (int a = 0; a < 3; ++a) pos(i, a) = centers[c][a] + spread(rng);
    clean(i, static_cast<Eigen::Index>(c)) = 1.0;
    for (Eigen::Index a = 0; a < 3; ++a) noisy(i, a) = clean(i, a) + noise * jitter(rng);
  }
  return {PointCloud(std::move(pos), std::move(noisy)), std::move(clean), std::move(truth)};
}

LabelFixture two_cluster_labels(std::size_t points, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> spread(0.0, 0.5);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  const auto n = static_cast<Eigen::Index>(points);
  PositionMatrix pos(n, 3);
  FeatureMatrix p(n, 2);
  std::vector<std::size_t> truth(points);
  std::vector<bool> corrupted(points, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const std::size_t label = ui % 2;
    truth[ui] = label;
    pos(i, 0) = (label == 0 ? -2.0 : 2.0) + spread(rng);
    pos(i, 1) = spread(rng);
    pos(i, 2) = spread(rng);
    corrupted[ui] = coin(rng) < noise;
    const double own = corrupted[ui] ? 0.4 : 0.9;
    p(i, static_cast<Eigen::Index>(label)) = own;
    p(i, static_cast<Eigen::Index>(1 - label)) = 1.0 - own;
  }
  return {PointCloud(std::move(pos)), std::move(p), std::move(truth), std::move(corrupted)};
}

PointCloud two_node_cloud() {
  PositionMatrix pos(2, 3);
  pos << 0.0, 0.0, 0.0, 1.0, 0.0, 0.0;
  FeatureMatrix f(2, 1);
  f << 0.0, 2.0;
  return PointCloud(std::move(pos), std::move(f));
}

SimilarityField random_symmetric_similarity(std::size_t n, std::mt19937_64& rng) {
  if (n < 2) throw std::invalid_argument("symmetric similarities need at least two nodes");
  std::uniform_int_distribution<std::size_t> count(1, 4);
  std::uniform_real_distribution<double> mass(0.1, 1.0);
  const std::size_t terms = count(rng);
  std::vector<double> alpha(terms);
  for (double& a : alpha) a = mass(rng);
  const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);

  std::vector<std::map<NodeIndex, double>> rows(n);
  std::vector<NodeIndex> perm(n);
  for (std::size_t t = 0; t < terms; ++t) {
    bool deranged = false;
    while (!deranged) {
      std::iota(perm.begin(), perm.end(), NodeIndex{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      deranged = true;
      for (std::size_t i = 0; i < n; ++i) deranged = deranged && perm[i] != i;
    }
    const double a = 0.5 * alpha[t] / total;
    for (std::size_t i = 0; i < n; ++i) {
      rows[i][perm[i]] += a;
      rows[perm[i]][i] += a;
    }
  }
  std::vector<std::vector<NodeIndex>> lists(n);
  std::vector<std::vector<double>> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [j, w] : rows[i]) {
      lists[i].push_back(j);
      weights[i].push_back(w);
    }
  }
  return SimilarityField(NeighborGraph(lists, weights));
}

NeighborGraph random_weighted_graph(std::size_t n, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::vector<NodeIndex>> lists(n);
  std::vector<std::vector<double>> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || coin(rng) >= density) continue;
      lists[i].push_back(j);
      weights[i].push_back(1.0 - coin(rng));
    }
  }
  return NeighborGraph(lists, weights);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = g(rng);
  }
  return m;
}

FeatureMatrix random_features(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  return random_matrix(rows, cols, rng);
}

PointCloud random_cloud(std::size_t n, std::size_t feature_dim, std::mt19937_64& rng) {
  PositionMatrix pos = random_matrix(n, 3, rng);
  return PointCloud(std::move(pos), random_features(n, feature_dim, rng));
}

}  // namespace crfconv::cli

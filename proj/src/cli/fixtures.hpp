#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "crfconv/cloud.hpp"
#include "crfconv/crf_continuous.hpp"

namespace crfconv::cli {

/// Three well separated blobs. Features are the one-hot cluster indicator
/// plus Gaussian noise of standard deviation `noise`.
struct ClusterFixture {
  PointCloud cloud;
  FeatureMatrix clean;  // noise-free features
  std::vector<std::size_t> truth;
};
ClusterFixture three_cluster_cloud(std::size_t points, double noise, std::uint64_t seed);

/// Two blobs with two-label unary probabilities. A fraction `noise` of the
/// points gets a unary leaning toward the wrong label (0.4 / 0.6); the rest are
/// confident (0.9 / 0.1). The cloud has no features.
struct LabelFixture {
  PointCloud cloud;
  FeatureMatrix probabilities;
  std::vector<std::size_t> truth;
  std::vector<bool> corrupted;
};
LabelFixture two_cluster_labels(std::size_t points, double noise, std::uint64_t seed);

/// Points at (0,0,0) and (1,0,0) with scalar features 0 and 2.
PointCloud two_node_cloud();

/// Symmetric, row-normalized similarities with zero diagonal: a random convex
/// combination of (P + P^T)/2 over random derangements P. Needs n >= 2.
SimilarityField random_symmetric_similarity(std::size_t n, std::mt19937_64& rng);

/// Random directed graph (each ordered pair kept with probability `density`)
/// with weights uniform in (0, 1].
NeighborGraph random_weighted_graph(std::size_t n, double density, std::mt19937_64& rng);

/// Standard normal entries.
Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
FeatureMatrix random_features(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
PointCloud random_cloud(std::size_t n, std::size_t feature_dim, std::mt19937_64& rng);

}  // namespace crfconv::cli

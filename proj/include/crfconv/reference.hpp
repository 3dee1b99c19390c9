#pragma once

// Single-threaded kernels written with plain loops. They mirror the parallel
// library kernels and serve as the baseline for parity tests and benchmarks.

#include <span>
#include <vector>

#include "crfconv/cloud.hpp"
#include "crfconv/crf_continuous.hpp"

namespace crfconv::reference {

/// Full sort of every candidate per node.
NeighborGraph knn_graph(const PointCloud& cloud, std::size_t k);

/// Softmax of negative squared distances between already projected features.
std::vector<double> similarity_weights(const FeatureMatrix& projected, const NeighborGraph& graph);

/// One Jacobi step x_i <- (I + C)^{-1} (z_i + C sum_j s_ij x_j), solving the
/// d x d system per node.
FeatureMatrix crf_jacobi_step(const FeatureMatrix& z, const FeatureMatrix& x, const SimilarityField& sim,
                              const Matrix& compat);

FeatureMatrix diffusion_step(const FeatureMatrix& h, const NeighborGraph& graph, double c);

/// Posterior of one discrete mean-field step.
FeatureMatrix discrete_crf_step(const FeatureMatrix& p, const FeatureMatrix& q, const NeighborGraph& graph,
                                std::span<const double> weights, const Matrix& compat);

}  // namespace crfconv::reference

#pragma once

#include <optional>
#include <vector>

#include "crfconv/cloud.hpp"
#include "crfconv/energy.hpp"
#include "crfconv/transform.hpp"

namespace crfconv {

/// Row-normalized edge similarities: for every node with neighbors the
/// outgoing weights are >= 0 and sum to 1 (within 1e-9).
class SimilarityField {
public:
  /// Throws InvariantError if a non-empty row does not sum to 1.
  explicit SimilarityField(NeighborGraph normalized);

  /// Divides raw similarities s_ij by their row sums. Rows whose weights are
  /// all zero are rejected.
  static SimilarityField normalize(const NeighborGraph& raw);

  const NeighborGraph& graph() const { return graph_; }
  std::size_t num_nodes() const { return graph_.num_nodes(); }
  std::span<const NodeIndex> neighbors(NodeIndex i) const { return graph_.neighbors(i); }
  std::span<const double> weights(NodeIndex i) const { return graph_.weights(i); }

private:
  NeighborGraph graph_;
};

enum class Schedule { Jacobi, GaussSeidel };

Schedule parse_schedule(std::string_view name);
const char* schedule_name(Schedule s);

struct ContinuousCrfState {
  FeatureMatrix observed;  // Z
  FeatureMatrix latent;    // X, the mean-field means
  std::optional<std::vector<Matrix>> covariance;
  std::size_t steps = 0;
  std::vector<double> energy_trace;

  /// X initialized to Z.
  static ContinuousCrfState start(FeatureMatrix z);
};

struct CrfConfig {
  std::size_t steps = 1;
  Schedule schedule = Schedule::Jacobi;
  /// nullopt selects the exact identity of the feature width.
  std::optional<CompatibilityMatrix> compat;
  /// Stop once a step would move X by at most this much (max norm). 0 runs
  /// exactly `steps` steps; infinity runs none.
  double convergence_tol = 0.0;
  Activation readout = Activation::leaky_relu(0.1);
  bool record_energy = true;

  CompatibilityMatrix compat_for(std::size_t d) const;
};

/// d'^2_ij = |T(f_i) - T(f_j)|^2, s_ij = softmax_j(-d'^2_ij) over N(i).
SimilarityField pairwise_similarity(const FeatureMatrix& guide, const NeighborGraph& graph,
                                    const PointwiseTransform& projection);

/// Energy model whose minimizer is the fixed point of the normalized message
/// passing when the similarities are symmetric: s_ij = s_hat_ij / 2 on every
/// stored edge, so each symmetric pair contributes s_hat_ij * C in total.
QuadraticEnergyModel normalized_energy_model(const SimilarityField& sim, const CompatibilityMatrix& compat,
                                             const FeatureMatrix& observed);

/// One message-passing step:
///   m_i = C sum_j s_ij x_j,   x_i <- (I + C)^{-1} (z_i + m_i).
/// Jacobi reads the previous iterate, Gauss-Seidel updates in node order.
ContinuousCrfState crf_step(const ContinuousCrfState& state, const SimilarityField& sim, const CrfConfig& cfg);

/// Up to cfg.steps steps with the early-stop rule of cfg.convergence_tol.
ContinuousCrfState run_crf(ContinuousCrfState state, const SimilarityField& sim, const CrfConfig& cfg);

struct CrfConvolution {
  FeatureMatrix output;  // sigma(h^T)
  ContinuousCrfState state;
  SimilarityField similarity;
};

/// z = unary(input); s = pairwise_similarity(guide, graph, projection);
/// run the message passing; output = readout(x).
CrfConvolution crf_convolve(const FeatureMatrix& input, const NeighborGraph& graph, const PointwiseTransform& unary,
                            const PointwiseTransform& projection, const FeatureMatrix& guide, const CrfConfig& cfg);

/// Sigma_i = 1/2 (I + sum_j w_ij)^{-1} with w_ij = s_ij C. With normalized
/// similarities this is 1/2 (I + C)^{-1} for nodes with neighbors and I/2 for
/// isolated nodes.
std::vector<Matrix> mean_field_covariance(const SimilarityField& sim, const CompatibilityMatrix& compat);

/// Same update for an arbitrary (unnormalized) model.
std::vector<Matrix> mean_field_covariance(const QuadraticEnergyModel& model);

/// Coordinate descent on the energy (per node, outgoing edges):
///   x_i <- (I + sum_j w_ij)^{-1} (z_i + sum_j w_ij x_j).
FeatureMatrix coordinate_descent_step(const QuadraticEnergyModel& model, const FeatureMatrix& x, Schedule schedule);

/// Gaussian mean-field update of the means in information form: each factor
/// Q_i has precision 2 (I + sum_j w_ij) and potential 2 (z_i + sum_j w_ij mu_j).
FeatureMatrix mean_field_mean_step(const QuadraticEnergyModel& model, const FeatureMatrix& mu, Schedule schedule);

/// Covariance part of KL(Q||P) for Q_i = N(mu_i, Sigma_i), one term per node:
///   sum_i tr(Sigma_i (I + sum_j w_ij)) - 1/2 log|Sigma_i|.
/// mean_field_covariance(model) is its minimizer.
double covariance_objective(const QuadraticEnergyModel& model, const std::vector<Matrix>& sigma);

struct DecodeOptions {
  std::size_t graph_k = 16;
  std::size_t interpolation_k = kDefaultInterpolationK;
};

/// Upsamples coarse features onto the fine cloud, runs the CRF convolution on
/// the fine kNN graph with fine.features() as guide, and concatenates the
/// result with the guide: width d + d'.
FeatureMatrix decode_level(const PointCloud& coarse, const PointCloud& fine, const PointwiseTransform& unary,
                           const PointwiseTransform& projection, const CrfConfig& cfg,
                           const DecodeOptions& options = {});

/// Cotangents of sum(upstream .* crf_convolve(...).output) for the unrolled
/// Jacobi iteration.
struct CrfGradients {
  FeatureMatrix input;
  FeatureMatrix guide;
  std::vector<PointwiseTransform::LayerGradient> unary;
  std::vector<PointwiseTransform::LayerGradient> projection;
  /// d/dc of C = c^T c + eps I; empty for the exact identity.
  Matrix compat_factor;
};

/// Throws UnsupportedConfiguration for the Gauss-Seidel schedule or an
/// early-stop tolerance.
CrfGradients crf_gradients(const FeatureMatrix& input, const NeighborGraph& graph, const PointwiseTransform& unary,
                           const PointwiseTransform& projection, const FeatureMatrix& guide, const CrfConfig& cfg,
                           const FeatureMatrix& upstream);

}  // namespace crfconv

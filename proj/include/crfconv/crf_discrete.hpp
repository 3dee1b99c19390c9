#pragma once

#include <string_view>
#include <vector>

#include "crfconv/cloud.hpp"
#include "crfconv/transform.hpp"

namespace crfconv {

inline constexpr double kUnaryFloor = 1e-12;

/// Unary probabilities p and approximate posterior q, one simplex row per node.
class LabelField {
public:
  /// q starts at p. Throws InvariantError (naming the row) when a row is
  /// negative or does not sum to 1 within `tolerance`.
  explicit LabelField(FeatureMatrix p, double tolerance = 1e-9);
  LabelField(FeatureMatrix p, FeatureMatrix q, double tolerance = 1e-9);

  const FeatureMatrix& unary() const { return p_; }
  const FeatureMatrix& posterior() const { return q_; }
  std::size_t num_nodes() const { return static_cast<std::size_t>(p_.rows()); }
  std::size_t num_labels() const { return static_cast<std::size_t>(p_.cols()); }

  /// argmax of every posterior row, ties to the lower label.
  std::vector<std::size_t> hard_labels() const;

private:
  FeatureMatrix p_;
  FeatureMatrix q_;
};

/// Throws InvariantError naming the first row off the simplex.
void check_simplex_rows(const FeatureMatrix& m, double tolerance, std::string_view what);

/// w_ij = sum_m omega_m exp(-|P_m^T f_i - P_m^T f_j|^2). Each component's
/// projection is a PointwiseTransform (a single linear stage for the classic
/// Mahalanobis kernel).
struct KernelMixture {
  std::vector<PointwiseTransform> projections;
  std::vector<double> weights;

  /// One component, omega = 1, P = I.
  static KernelMixture unit();
  /// Reads components "kernel0", "kernel1", ... and the mixing layer "mixture"
  /// (a single linear stage with one output; its bias is ignored). Without a
  /// "mixture" entry every omega is 1.
  static KernelMixture from_transforms(const NamedTransforms& transforms);

  bool has_negative_weights() const;
};

/// Per-edge kernel weights in flat edge order. Values may be negative when a
/// mixture weight is negative.
std::vector<double> kernel_weights(const FeatureMatrix& features, const NeighborGraph& graph,
                                   const KernelMixture& mix);

class LabelCompatibility {
public:
  static LabelCompatibility identity(std::size_t labels);
  /// 11^T - I: penalizes disagreeing labels, the Potts model.
  static LabelCompatibility potts_complement(std::size_t labels);
  static LabelCompatibility from_matrix(Matrix c);
  /// "identity" or "potts-complement".
  static LabelCompatibility preset(std::string_view name, std::size_t labels);

  const Matrix& matrix() const { return c_; }
  std::size_t num_labels() const { return static_cast<std::size_t>(c_.rows()); }

private:
  explicit LabelCompatibility(Matrix c);
  Matrix c_;
};

/// m_i = sum_j w_ij q_j (previous iterate), q_i = softmax(log p_i - C m_i).
LabelField discrete_crf_step(const LabelField& field, const NeighborGraph& graph, std::span<const double> weights,
                             const LabelCompatibility& compat);

/// q^0 = p, then `steps` Jacobi steps.
LabelField discrete_crf_infer(const FeatureMatrix& p, const FeatureMatrix& features, const NeighborGraph& graph,
                              const KernelMixture& mix, const LabelCompatibility& compat, std::size_t steps);

/// Row-wise softmax of log(max(p, floor)) - shift, with max subtraction.
Eigen::RowVectorXd softmax_log_unary(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                                     const Eigen::Ref<const Eigen::RowVectorXd>& shift);

}  // namespace crfconv

#pragma once

#include "crfconv/crf_continuous.hpp"

namespace crfconv::detail {

/// C and (I + C)^{-1}, factored once per layer.
struct MessageOperator {
  explicit MessageOperator(const CompatibilityMatrix& c);

  Matrix compat;
  Matrix update;
  bool identity;
};

void update_node(const MessageOperator& op, const SimilarityField& sim, const FeatureMatrix& z,
                 const FeatureMatrix& source, NodeIndex i, Eigen::Ref<Eigen::RowVectorXd> out);

/// One Jacobi (node-parallel) or Gauss-Seidel (in-place, node order) sweep.
FeatureMatrix advance(const FeatureMatrix& z, const FeatureMatrix& x, const SimilarityField& sim,
                      const MessageOperator& op, Schedule schedule);

double max_abs_diff(const FeatureMatrix& a, const FeatureMatrix& b);

}  // namespace crfconv::detail

#pragma once

#include <string>
#include <vector>

#include "crfconv/cloud.hpp"
#include "crfconv/crf_continuous.hpp"

namespace crfconv {

inline constexpr double kDefaultDiffusionCoefficient = 0.5;
inline constexpr double kDefaultSteadyTolerance = 1e-10;

/// Explicit graph diffusion h <- h - c L h with L = I - D^{-1} W. The step is
/// stable (a convex combination of neighbors) for c in (0, 1].
struct DiffusionConfig {
  double c = kDefaultDiffusionCoefficient;
  std::size_t steps = 1;

  void validate() const;
};

/// h_i <- h_i - c sum_j w_ij (h_i - h_j). Isolated nodes keep their value. The
/// graph weights are expected to be row-normalized; c = 0 is the identity.
FeatureMatrix diffusion_step(const FeatureMatrix& h, const NeighborGraph& graph, double c);

/// |L h|_inf, zero exactly when h is constant on every neighborhood.
double laplacian_residual(const FeatureMatrix& h, const NeighborGraph& graph);

struct SteadyState {
  FeatureMatrix h;
  std::size_t steps = 0;
  bool converged = false;
  double residual = 0.0;  // laplacian_residual of h
};

/// Iterates until a step would change h by less than `tol` (max norm; that
/// step is not applied) or max_steps steps have run. max_steps = 0 selects
/// 10 N. Non-convergence is reported through `converged`, not thrown.
SteadyState diffuse_to_steady(const FeatureMatrix& h, const NeighborGraph& graph, double c,
                              double tol = kDefaultSteadyTolerance, std::size_t max_steps = 0);

struct DiffusionComparisonRow {
  std::size_t step = 0;
  double crf_fidelity = 0.0;  // |X - Z|_F
  double crf_dirichlet = 0.0;
  double diff_fidelity = 0.0;
  double diff_dirichlet = 0.0;
};

struct DiffusionComparison {
  /// Max absolute difference between the CRF (C = I) and diffusion (c = 1/2)
  /// iterates after the first step.
  double step1_max_diff = 0.0;
  std::vector<DiffusionComparisonRow> rows;  // step 0 is Z itself
  FeatureMatrix crf_final;
  FeatureMatrix diffusion_final;
};

/// Runs both processes from Z for `steps` steps: the Jacobi CRF with C = I and
/// diffusion with c = 1/2, both on the normalized similarity weights. The
/// first steps agree on nodes with neighbors; an isolated node is halved by
/// the CRF and kept by diffusion.
DiffusionComparison compare_crf_vs_diffusion(const FeatureMatrix& z, const SimilarityField& sim, std::size_t steps);

/// step,crf_fidelity,crf_dirichlet,diff_fidelity,diff_dirichlet
std::string format_comparison_csv(const DiffusionComparison& report);

}  // namespace crfconv

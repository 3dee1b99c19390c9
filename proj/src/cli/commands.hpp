#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "crfconv/transform.hpp"

namespace crfconv::cli {

/// The input cloud, or the configured synthetic fixture when no input path is
/// given.
PointCloud load_cloud(const RunConfig& cfg);

/// Radius graph when graph.radius is set, otherwise (dilated) kNN.
NeighborGraph build_graph(const PointCloud& cloud, const RunConfig& cfg);

/// "unary" and "projection" entries of crf.transforms; identity when absent.
struct CrfTransforms {
  PointwiseTransform unary;
  PointwiseTransform projection;
};
CrfTransforms load_crf_transforms(const RunConfig& cfg);

struct SweepRow {
  std::size_t steps = 0;       // requested T
  std::size_t steps_run = 0;   // after early stopping
  double energy = 0.0;         // energy of the latent X
  double fidelity = 0.0;       // |X - Z|_F
  double diffusion_fidelity = 0.0;  // |H^T - Z|_F, diffusion with the same weights
  double seconds = 0.0;        // CRF wall time, informational
};

/// Runs the CRF for every T in cfg.sweep_steps on the cloud's features.
std::vector<SweepRow> run_sweep(const PointCloud& cloud, const RunConfig& cfg);

// Each command writes only to cfg.output.dir and reports diagnostics on `diag`.
void cmd_build_graph(const RunConfig& cfg, std::ostream& diag);
void cmd_smooth(const RunConfig& cfg, std::ostream& diag);
void cmd_refine_labels(const RunConfig& cfg, std::ostream& diag);
void cmd_diffuse_compare(const RunConfig& cfg, std::ostream& diag);
void cmd_sweep_steps(const RunConfig& cfg, std::ostream& diag);
/// Returns the number of failed checks.
int cmd_check_oracle(const RunConfig& cfg, std::ostream& diag);

}  // namespace crfconv::cli

#include "crfconv/diffusion.hpp"

#include <cmath>

#include "crfconv/text.hpp"

namespace crfconv {

void DiffusionConfig::validate() const {
  if (!std::isfinite(c) || c <= 0.0 || c > 1.0) throw InvariantError("diffusion coefficient must lie in (0, 1]");
}

FeatureMatrix diffusion_step(const FeatureMatrix& h, const NeighborGraph& graph, double c) {
  if (!graph.has_weights()) throw InvariantError("diffusion needs edge weights");
  if (static_cast<std::size_t>(h.rows()) != graph.num_nodes()) throw ShapeError("signal does not match graph size");
  if (!std::isfinite(c)) throw InvariantError("diffusion coefficient must be finite");
  FeatureMatrix out(h.rows(), h.cols());
  const auto n = static_cast<std::ptrdiff_t>(graph.num_nodes());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto nb = graph.neighbors(static_cast<NodeIndex>(i));
    const auto w = graph.weights(static_cast<NodeIndex>(i));
    Eigen::RowVectorXd lap = Eigen::RowVectorXd::Zero(h.cols());
    for (std::size_t k = 0; k < nb.size(); ++k) lap += w[k] * (h.row(i) - h.row(static_cast<Eigen::Index>(nb[k])));
    out.row(i) = h.row(i) - c * lap;
  }
  return out;
}

double laplacian_residual(const FeatureMatrix& h, const NeighborGraph& graph) {
  if (!graph.has_weights()) throw InvariantError("diffusion needs edge weights");
  if (static_cast<std::size_t>(h.rows()) != graph.num_nodes()) throw ShapeError("signal does not match graph size");
  double worst = 0.0;
  for (NodeIndex i = 0; i < graph.num_nodes(); ++i) {
    const auto nb = graph.neighbors(i);
    const auto w = graph.weights(i);
    const auto ii = static_cast<Eigen::Index>(i);
    double degree = 0.0;
    Eigen::RowVectorXd mix = Eigen::RowVectorXd::Zero(h.cols());
    for (std::size_t k = 0; k < nb.size(); ++k) {
      degree += w[k];
      mix += w[k] * h.row(static_cast<Eigen::Index>(nb[k]));
    }
    if (degree <= 0.0) continue;
    worst = std::max(worst, (h.row(ii) - mix / degree).cwiseAbs().maxCoeff());
  }
  return worst;
}

SteadyState diffuse_to_steady(const FeatureMatrix& h, const NeighborGraph& graph, double c, double tol,
                              std::size_t max_steps) {
  if (!(tol > 0.0)) throw std::invalid_argument("steady-state tolerance must be positive");
  if (max_steps == 0) max_steps = 10 * std::max<std::size_t>(graph.num_nodes(), 1);
  SteadyState out;
  out.h = h;
  while (true) {
    FeatureMatrix next = diffusion_step(out.h, graph, c);
    const double change = out.h.size() == 0 ? 0.0 : (next - out.h).cwiseAbs().maxCoeff();
    if (change < tol) {
      out.converged = true;
      break;
    }
    if (out.steps == max_steps) break;
    out.h = std::move(next);
    ++out.steps;
  }
  out.residual = laplacian_residual(out.h, graph);
  return out;
}

DiffusionComparison compare_crf_vs_diffusion(const FeatureMatrix& z, const SimilarityField& sim, std::size_t steps) {
  if (static_cast<std::size_t>(z.rows()) != sim.num_nodes()) throw ShapeError("Z does not match graph size");
  const NeighborGraph& graph = sim.graph();
  CrfConfig cfg;
  cfg.steps = 1;
  cfg.schedule = Schedule::Jacobi;
  cfg.compat = CompatibilityMatrix::identity(static_cast<std::size_t>(z.cols()));
  cfg.record_energy = false;

  DiffusionComparison report;
  auto state = ContinuousCrfState::start(z);
  FeatureMatrix h = z;
  const double base = dirichlet_energy(graph, z);
  report.rows.push_back({0, 0.0, base, 0.0, base});
  for (std::size_t t = 1; t <= steps; ++t) {
    state = crf_step(state, sim, cfg);
    h = diffusion_step(h, graph, kDefaultDiffusionCoefficient);
    if (t == 1 && h.size() > 0) report.step1_max_diff = (state.latent - h).cwiseAbs().maxCoeff();
    report.rows.push_back({t, (state.latent - z).norm(), dirichlet_energy(graph, state.latent), (h - z).norm(),
                           dirichlet_energy(graph, h)});
  }
  report.crf_final = state.latent;
  report.diffusion_final = std::move(h);
  return report;
}

std::string format_comparison_csv(const DiffusionComparison& report) {
  std::string out = "step,crf_fidelity,crf_dirichlet,diff_fidelity,diff_dirichlet\n";
  for (const auto& row : report.rows) {
    out += std::to_string(row.step);
    for (double v : {row.crf_fidelity, row.crf_dirichlet, row.diff_fidelity, row.diff_dirichlet}) {
      out += ',';
      append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace crfconv

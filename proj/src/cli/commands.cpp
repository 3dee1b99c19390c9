#include "cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include "cli/csv.hpp"
#include "cli/fixtures.hpp"
#include "crfconv/crf_discrete.hpp"
#include "crfconv/diffusion.hpp"
#include "crfconv/text.hpp"

namespace crfconv::cli {

namespace {

std::filesystem::path output_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output.dir);
  return cfg.output.dir / name;
}

std::string cloud_file_name(const RunConfig& cfg, const std::string& stem) {
  return stem + (cfg.output.format == CloudFormat::PlyAscii ? ".ply" : ".csv");
}

void write_output(const RunConfig& cfg, const std::string& name, std::string_view content) {
  write_text_file(output_path(cfg, name), content);
}

FeatureMatrix concat_columns(const FeatureMatrix& a, const FeatureMatrix& b) {
  FeatureMatrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

PointCloud load_cloud(const RunConfig& cfg) {
  if (cfg.input.cloud) {
    const auto format = cfg.input.format ? *cfg.input.format : cloud_format_from_path(*cfg.input.cloud);
    return read_cloud(*cfg.input.cloud, format);
  }
  if (cfg.fixture.kind == "two-node") return two_node_cloud();
  if (cfg.fixture.kind == "two-cluster") return two_cluster_labels(cfg.fixture.points, cfg.fixture.noise, cfg.seed).cloud;
  return three_cluster_cloud(cfg.fixture.points, cfg.fixture.noise, cfg.seed).cloud;
}

NeighborGraph build_graph(const PointCloud& cloud, const RunConfig& cfg) {
  if (cfg.graph.radius) return radius_graph(cloud, *cfg.graph.radius * *cfg.graph.radius);
  if (cfg.graph.dilation > 1) return dilated_knn_graph(cloud, cfg.graph.k, cfg.graph.dilation);
  return knn_graph(cloud, cfg.graph.k);
}

CrfTransforms load_crf_transforms(const RunConfig& cfg) {
  CrfTransforms out{PointwiseTransform::identity(), PointwiseTransform::identity()};
  if (!cfg.crf.transforms) return out;
  const NamedTransforms named = read_transforms(*cfg.crf.transforms);
  if (auto t = find_transform(named, "unary")) out.unary = std::move(*t);
  if (auto t = find_transform(named, "projection")) out.projection = std::move(*t);
  return out;
}

std::vector<SweepRow> run_sweep(const PointCloud& cloud, const RunConfig& cfg) {
  const NeighborGraph graph = build_graph(cloud, cfg);
  const CrfTransforms tf = load_crf_transforms(cfg);
  const FeatureMatrix z = tf.unary.apply(cloud.features());
  const SimilarityField sim = pairwise_similarity(cloud.features(), graph, tf.projection);
  CrfConfig crf = cfg.crf_config(static_cast<std::size_t>(z.cols()));
  crf.record_energy = false;
  const QuadraticEnergyModel model = normalized_energy_model(sim, crf.compat_for(static_cast<std::size_t>(z.cols())), z);

  std::vector<SweepRow> rows;
  for (std::size_t t : cfg.sweep_steps) {
    crf.steps = t;
    const auto start = std::chrono::steady_clock::now();
    const ContinuousCrfState state = run_crf(ContinuousCrfState::start(z), sim, crf);
    const auto stop = std::chrono::steady_clock::now();
    FeatureMatrix h = z;
    for (std::size_t s = 0; s < t; ++s) h = diffusion_step(h, sim.graph(), cfg.diffusion.c);

    SweepRow row;
    row.steps = t;
    row.steps_run = state.steps;
    row.energy = evaluate_energy(model, state.latent);
    row.fidelity = (state.latent - z).norm();
    row.diffusion_fidelity = (h - z).norm();
    row.seconds = std::chrono::duration<double>(stop - start).count();
    rows.push_back(row);
  }
  return rows;
}

void cmd_build_graph(const RunConfig& cfg, std::ostream& diag) {
  PointCloud cloud = load_cloud(cfg);
  if (cfg.graph.sample_ratio < 1.0) {
    if (cloud.empty()) throw std::invalid_argument("cannot subsample an empty cloud");
    const auto seed_index = static_cast<NodeIndex>(cfg.seed % cloud.size());
    const SampleIndex sample = farthest_point_sample(cloud, cfg.graph.sample_ratio, seed_index);
    PositionMatrix pos(static_cast<Eigen::Index>(sample.selected.size()), 3);
    FeatureMatrix feat(pos.rows(), cloud.features().cols());
    for (std::size_t r = 0; r < sample.selected.size(); ++r) {
      pos.row(static_cast<Eigen::Index>(r)) = cloud.positions().row(static_cast<Eigen::Index>(sample.selected[r]));
      feat.row(static_cast<Eigen::Index>(r)) = cloud.features().row(static_cast<Eigen::Index>(sample.selected[r]));
    }
    cloud = PointCloud(std::move(pos), std::move(feat));
    write_cloud(cloud, output_path(cfg, cloud_file_name(cfg, "sampled")), cfg.output.format);
  }
  const NeighborGraph graph = build_graph(cloud, cfg);
  write_output(cfg, "graph.csv", format_edge_list(cloud, graph));
  diag << "graph: " << cloud.size() << " nodes, " << graph.num_edges() << " edges\n";
}

void cmd_smooth(const RunConfig& cfg, std::ostream& diag) {
  const PointCloud cloud = load_cloud(cfg);
  if (cloud.feature_dim() == 0) throw std::invalid_argument("smoothing needs per-point features");
  const NeighborGraph graph = build_graph(cloud, cfg);
  const CrfTransforms tf = load_crf_transforms(cfg);
  const CrfConfig crf = cfg.crf_config(tf.unary.output_dim(cloud.feature_dim()));
  const CrfConvolution result = crf_convolve(cloud.features(), graph, tf.unary, tf.projection, cloud.features(), crf);

  write_cloud(PointCloud(cloud.positions(), result.output), output_path(cfg, cloud_file_name(cfg, "smoothed")),
              cfg.output.format);
  write_output(cfg, "trace.csv", format_trace(result.state.energy_trace));
  diag << "smooth: " << result.state.steps << " step(s)\n";

  if (cfg.check_exact) {
    const auto d = static_cast<std::size_t>(result.state.observed.cols());
    const QuadraticEnergyModel model = normalized_energy_model(result.similarity, crf.compat_for(d), result.state.observed);
    const FeatureMatrix exact = solve_exact(model);
    const double dev = exact.size() == 0 ? 0.0 : (exact - result.state.latent).cwiseAbs().maxCoeff();
    diag << "max deviation from exact solution: " << format_number(dev) << '\n';
  }
}

void cmd_refine_labels(const RunConfig& cfg, std::ostream& diag) {
  PointCloud cloud;
  FeatureMatrix p;
  if (!cfg.input.cloud && !cfg.input.probabilities && cfg.fixture.kind == "two-cluster") {
    LabelFixture fx = two_cluster_labels(cfg.fixture.points, cfg.fixture.noise, cfg.seed);
    cloud = std::move(fx.cloud);
    p = std::move(fx.probabilities);
  } else {
    if (!cfg.input.probabilities) throw std::invalid_argument("refine-labels needs input.probabilities");
    cloud = load_cloud(cfg);
    p = read_probabilities(*cfg.input.probabilities);
    if (static_cast<std::size_t>(p.rows()) != cloud.size()) {
      throw ShapeError("probability file has " + std::to_string(p.rows()) + " rows but the cloud has " +
                       std::to_string(cloud.size()) + " points");
    }
  }
  const auto labels = static_cast<std::size_t>(p.cols());
  const LabelCompatibility compat = cfg.discrete.compat_file
                                        ? LabelCompatibility::from_matrix(parse_matrix(read_text_file(*cfg.discrete.compat_file)))
                                        : LabelCompatibility::preset(cfg.discrete.compat, labels);
  const KernelMixture mix =
      cfg.discrete.kernel ? KernelMixture::from_transforms(read_transforms(*cfg.discrete.kernel)) : KernelMixture::unit();
  if (mix.has_negative_weights()) diag << "warning: negative kernel mixture weight, edge weights may be negative\n";

  const NeighborGraph graph = build_graph(cloud, cfg);
  const FeatureMatrix kernel_features = concat_columns(cloud.positions(), cloud.features());
  const LabelField field = discrete_crf_infer(p, kernel_features, graph, mix, compat, cfg.discrete.steps);

  write_output(cfg, "refined.csv", format_matrix(field.posterior()));
  write_output(cfg, "labels.csv", format_labels(field.hard_labels()));
  const auto before = LabelField(p, kProbabilityRowTolerance).hard_labels();
  const auto after = field.hard_labels();
  std::size_t flips = 0;
  for (std::size_t i = 0; i < after.size(); ++i) flips += before[i] != after[i];
  diag << "refine-labels: " << flips << " label(s) changed\n";
}

void cmd_diffuse_compare(const RunConfig& cfg, std::ostream& diag) {
  const PointCloud cloud = load_cloud(cfg);
  if (cloud.feature_dim() == 0) throw std::invalid_argument("diffusion comparison needs per-point features");
  const NeighborGraph graph = build_graph(cloud, cfg);
  const CrfTransforms tf = load_crf_transforms(cfg);
  const FeatureMatrix z = tf.unary.apply(cloud.features());
  const SimilarityField sim = pairwise_similarity(cloud.features(), graph, tf.projection);
  const DiffusionComparison report = compare_crf_vs_diffusion(z, sim, cfg.diffusion.steps);
  write_output(cfg, "diffusion.csv", format_comparison_csv(report));
  diag << "step-1 max difference: " << format_number(report.step1_max_diff) << '\n';
  if (const double asym = laplacian_asymmetry(sim.graph()); asym > 0.0) {
    diag << "note: similarity Laplacian is asymmetric (max |L_ij - L_ji| = " << format_number(asym)
         << "), Dirichlet energies may be negative\n";
  }
}

void cmd_sweep_steps(const RunConfig& cfg, std::ostream& diag) {
  const PointCloud cloud = load_cloud(cfg);
  if (cloud.feature_dim() == 0) throw std::invalid_argument("the sweep needs per-point features");
  const auto rows = run_sweep(cloud, cfg);
  std::string main = "steps,steps_run,energy,fidelity,diffusion_fidelity\n";
  std::string timing = "steps,seconds\n";
  for (const auto& r : rows) {
    main += std::to_string(r.steps) + ',' + std::to_string(r.steps_run);
    for (double v : {r.energy, r.fidelity, r.diffusion_fidelity}) {
      main += ',';
      append_number(main, v);
    }
    main += '\n';
    timing += std::to_string(r.steps) + ',';
    append_number(timing, r.seconds);
    timing += '\n';
  }
  write_output(cfg, "sweep.csv", main);
  write_output(cfg, "sweep_timing.csv", timing);
  diag << "sweep: " << rows.size() << " setting(s)\n";
}

namespace {

struct OracleCheck {
  std::string name;
  std::size_t instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_error <= tolerance; }
};

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

OracleCheck check_exact_solve(std::mt19937_64& rng) {
  OracleCheck c{"message-passing-vs-exact", 20, 0.0, 1e-8};
  for (std::size_t k = 0; k < c.instances; ++k) {
    const std::size_t n = pick(rng, 2, 30);
    const std::size_t d = pick(rng, 1, 4);
    const SimilarityField sim = random_symmetric_similarity(n, rng);
    const FeatureMatrix z = random_features(n, d, rng);
    CrfConfig crf;
    crf.compat = CompatibilityMatrix::from_factor(random_matrix(d, d, rng));
    crf.steps = 100000;
    crf.convergence_tol = 1e-12;
    crf.record_energy = false;
    const ContinuousCrfState state = run_crf(ContinuousCrfState::start(z), sim, crf);
    const FeatureMatrix exact = solve_exact(normalized_energy_model(sim, *crf.compat, z));
    c.max_error = std::max(c.max_error, (state.latent - exact).norm() / exact.norm());
  }
  return c;
}

OracleCheck check_mean_field(std::mt19937_64& rng) {
  OracleCheck c{"mean-field-vs-coordinate-descent", 20, 0.0, 1e-12};
  for (std::size_t k = 0; k < c.instances; ++k) {
    const std::size_t n = pick(rng, 2, 20);
    const std::size_t d = pick(rng, 1, 4);
    const NeighborGraph graph = random_weighted_graph(n, 0.4, rng);
    const FeatureMatrix z = random_features(n, d, rng);
    const QuadraticEnergyModel model(graph, CompatibilityMatrix::from_factor(random_matrix(d, d, rng)), z);
    const Schedule schedule = k % 2 ? Schedule::GaussSeidel : Schedule::Jacobi;
    FeatureMatrix x = z;
    FeatureMatrix mu = z;
    for (int t = 0; t < 25; ++t) {
      x = coordinate_descent_step(model, x, schedule);
      mu = mean_field_mean_step(model, mu, schedule);
      c.max_error = std::max(c.max_error, (x - mu).cwiseAbs().maxCoeff());
    }
  }
  return c;
}

OracleCheck check_diffusion_step(std::mt19937_64& rng) {
  OracleCheck c{"diffusion-step-1", 20, 0.0, 1e-12};
  for (std::size_t k = 0; k < c.instances; ++k) {
    const std::size_t n = pick(rng, 2, 100);
    const std::size_t d = pick(rng, 1, 4);
    const PointCloud cloud = random_cloud(n, d, rng);
    const SimilarityField sim =
        pairwise_similarity(cloud.features(), knn_graph(cloud, pick(rng, 1, 8)), PointwiseTransform::identity());
    c.max_error = std::max(c.max_error, compare_crf_vs_diffusion(cloud.features(), sim, 1).step1_max_diff);
  }
  return c;
}

OracleCheck check_monotone_energy(std::mt19937_64& rng) {
  OracleCheck c{"gauss-seidel-energy-monotone", 20, 0.0, 1e-10};
  for (std::size_t k = 0; k < c.instances; ++k) {
    const std::size_t n = pick(rng, 2, 30);
    const std::size_t d = pick(rng, 1, 4);
    const SimilarityField sim = random_symmetric_similarity(n, rng);
    const FeatureMatrix z = random_features(n, d, rng);
    CrfConfig crf;
    crf.compat = CompatibilityMatrix::from_factor(random_matrix(d, d, rng));
    crf.schedule = Schedule::GaussSeidel;
    crf.steps = 30;
    const ContinuousCrfState state = run_crf(ContinuousCrfState::start(z), sim, crf);
    double prev = evaluate_energy(normalized_energy_model(sim, *crf.compat, z), z);
    for (double e : state.energy_trace) {
      c.max_error = std::max(c.max_error, e - prev);
      prev = e;
    }
  }
  return c;
}

}  // namespace

int cmd_check_oracle(const RunConfig& cfg, std::ostream& diag) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<OracleCheck> checks;
  checks.push_back(check_exact_solve(rng));
  checks.push_back(check_mean_field(rng));
  checks.push_back(check_diffusion_step(rng));
  checks.push_back(check_monotone_energy(rng));

  std::string csv = "check,instances,max_error,tolerance,status\n";
  int failures = 0;
  for (const auto& c : checks) {
    csv += c.name + ',' + std::to_string(c.instances) + ',';
    append_number(csv, c.max_error);
    csv += ',';
    append_number(csv, c.tolerance);
    csv += c.passed() ? ",pass\n" : ",fail\n";
    failures += !c.passed();
    diag << (c.passed() ? "pass " : "FAIL ") << c.name << " max_error=" << format_number(c.max_error) << '\n';
  }
  write_output(cfg, "oracle.csv", csv);
  return failures;
}

}  // namespace crfconv::cli

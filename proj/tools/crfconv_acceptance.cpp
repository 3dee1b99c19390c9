// Acceptance run: one PASS/FAIL line per criterion.
//
//   crfconv_acceptance <path to crfconv> <scratch dir> [--known-failure N ...]
//
// Exit status is the number of failing criteria that are not listed as known
// failures. Known failures still print FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.hpp"
#include "cli/fixtures.hpp"
#include "crfconv/crf_continuous.hpp"
#include "crfconv/crf_discrete.hpp"
#include "crfconv/diffusion.hpp"
#include "crfconv/energy.hpp"
#include "oracles.hpp"

using namespace crfconv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

CompatibilityMatrix random_compat(std::mt19937_64& rng, std::size_t d) {
  return CompatibilityMatrix::from_factor(cli::random_matrix(d, d, rng));
}

Outcome exact_solve() {
  std::mt19937_64 rng(101);
  const auto start = Clock::now();
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = pick(rng, 2, 50);
    const std::size_t d = pick(rng, 1, 8);
    const auto sim = cli::random_symmetric_similarity(n, rng);
    CrfConfig cfg;
    cfg.compat = random_compat(rng, d);
    cfg.steps = 1000000;
    cfg.convergence_tol = 1e-12;
    cfg.record_energy = false;
    const FeatureMatrix z = cli::random_features(n, d, rng);
    const auto s = run_crf(ContinuousCrfState::start(z), sim, cfg);
    const auto exact = solve_exact(normalized_energy_model(sim, *cfg.compat, z));
    worst = std::max(worst, (s.latent - exact).norm() / exact.norm());
  }
  const double t = seconds_since(start);
  return {worst <= 1e-8 && t < 10.0, "max rel err " + fmt(worst) + ", " + fmt(t) + " s"};
}

Outcome mean_field_equivalence() {
  std::mt19937_64 rng(102);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = pick(rng, 2, 30);
    const std::size_t d = pick(rng, 1, 6);
    const QuadraticEnergyModel model(cli::random_weighted_graph(n, 0.3, rng), random_compat(rng, d),
                                     cli::random_features(n, d, rng));
    const Schedule schedule = k % 2 ? Schedule::GaussSeidel : Schedule::Jacobi;
    FeatureMatrix x = model.observed;
    FeatureMatrix mu = model.observed;
    for (int t = 0; t < 25; ++t) {
      x = coordinate_descent_step(model, x, schedule);
      mu = mean_field_mean_step(model, mu, schedule);
      worst = std::max(worst, (x - mu).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-12, "max diff " + fmt(worst)};
}

Outcome gauss_seidel_monotone() {
  std::mt19937_64 rng(103);
  double worst = 0.0;
  std::size_t violations = 0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = pick(rng, 2, 50);
    const std::size_t d = pick(rng, 1, 8);
    const auto sim = cli::random_symmetric_similarity(n, rng);
    CrfConfig cfg;
    cfg.compat = random_compat(rng, d);
    cfg.schedule = Schedule::GaussSeidel;
    cfg.steps = 40;
    const FeatureMatrix z = cli::random_features(n, d, rng);
    const auto s = run_crf(ContinuousCrfState::start(z), sim, cfg);
    double prev = evaluate_energy(normalized_energy_model(sim, *cfg.compat, z), z);
    for (double e : s.energy_trace) {
      worst = std::max(worst, e - prev);
      if (e - prev > 1e-10) ++violations;
      prev = e;
    }
  }
  return {violations == 0, "largest increase " + fmt(worst)};
}

Outcome covariance() {
  std::mt19937_64 rng(104);
  bool ok = true;
  double min_eig = INFINITY;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = pick(rng, 2, 30);
    const std::size_t d = pick(rng, 1, 8);
    const auto compat = random_compat(rng, d);
    const auto sim = SimilarityField::normalize(cli::random_weighted_graph(n, 0.3, rng));
    for (const auto& s : mean_field_covariance(sim, compat)) {
      ok = ok && s == s.transpose();
      min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues().minCoeff());
    }
  }
  ok = ok && min_eig > 0.0;
  using Lists = std::vector<std::vector<NodeIndex>>;
  const SimilarityField sim(NeighborGraph(Lists{{1}, {0}, {}}, {{1.0}, {1.0}, {}}));
  const auto exact = mean_field_covariance(sim, CompatibilityMatrix::identity(3));
  const bool closed = exact[0] == 0.25 * Matrix::Identity(3, 3) && exact[1] == 0.25 * Matrix::Identity(3, 3) &&
                      exact[2] == 0.5 * Matrix::Identity(3, 3) &&
                      mean_field_covariance(sim, random_compat(rng, 4))[2] == 0.5 * Matrix::Identity(4, 4);
  return {ok && closed, "min eigenvalue " + fmt(min_eig) + (closed ? ", closed forms exact" : ", closed forms wrong")};
}

struct GradInstance {
  FeatureMatrix input;
  FeatureMatrix guide;
  NeighborGraph graph;
  PointwiseTransform unary;
  PointwiseTransform projection;
  CrfConfig cfg;
  FeatureMatrix upstream;

  double loss() const {
    const auto out = crf_convolve(input, graph, unary, projection, guide, cfg).output;
    return (out.array() * upstream.array()).sum();
  }
};

double fd_error(const Vector& analytic, const Vector& x, const std::function<double(const Vector&)>& f) {
  const double h = 1e-5 * std::max(1.0, x.cwiseAbs().maxCoeff());
  return oracle::relative_error(analytic, oracle::central_difference(f, x, h));
}

Outcome gradients() {
  std::mt19937_64 rng(105);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = pick(rng, 2, 12);
    const std::size_t d_in = pick(rng, 1, 4);
    const std::size_t d = pick(rng, 1, 4);
    const std::size_t d_guide = pick(rng, 1, 3);
    const auto cloud = cli::random_cloud(n, d_guide, rng);
    GradInstance s{cli::random_features(n, d_in, rng),
                   cloud.features(),
                   knn_graph(cloud, pick(rng, 1, 4)),
                   PointwiseTransform({{cli::random_matrix(d, d_in, rng), cli::random_matrix(d, 1, rng),
                                        Activation::leaky_relu(0.2)}}),
                   PointwiseTransform({{0.7 * cli::random_matrix(2, d_guide, rng), cli::random_matrix(2, 1, rng),
                                        Activation::identity()}}),
                   CrfConfig{},
                   cli::random_features(n, d, rng)};
    s.cfg.steps = trial % 2 ? 3 : 1;
    s.cfg.compat = CompatibilityMatrix::from_factor(0.6 * cli::random_matrix(d, d, rng));
    s.cfg.record_energy = false;
    s.cfg.readout = trial % 3 == 2 ? Activation::leaky_relu(0.1) : Activation::identity();
    const auto g = crf_gradients(s.input, s.graph, s.unary, s.projection, s.guide, s.cfg, s.upstream);

    worst = std::max(worst, fd_error(oracle::flat(g.input), oracle::flat(s.input), [&](const Vector& v) {
                       GradInstance t = s;
                       t.input = oracle::unflat(v, s.input.rows(), s.input.cols());
                       return t.loss();
                     }));
    worst = std::max(worst, fd_error(PointwiseTransform::flatten(g.unary), s.unary.flatten_parameters(),
                                     [&](const Vector& v) {
                                       GradInstance t = s;
                                       t.unary.assign_parameters(v);
                                       return t.loss();
                                     }));
    worst = std::max(worst, fd_error(PointwiseTransform::flatten(g.projection), s.projection.flatten_parameters(),
                                     [&](const Vector& v) {
                                       GradInstance t = s;
                                       t.projection.assign_parameters(v);
                                       return t.loss();
                                     }));
    const Matrix factor = s.cfg.compat->factor();
    const double eps = s.cfg.compat->epsilon();
    const Vector gc = Eigen::Map<const Vector>(g.compat_factor.data(), g.compat_factor.size());
    worst = std::max(worst, fd_error(gc, Eigen::Map<const Vector>(factor.data(), factor.size()), [&](const Vector& v) {
                       GradInstance t = s;
                       t.cfg.compat = CompatibilityMatrix::from_factor(
                           Eigen::Map<const Matrix>(v.data(), factor.rows(), factor.cols()), eps);
                       return t.loss();
                     }));
  }
  return {worst <= 1e-5, "max rel err " + fmt(worst)};
}

Outcome diffusion_correspondence() {
  std::mt19937_64 rng(106);
  double step1 = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = pick(rng, 2, 80);
    const auto g = knn_graph(cli::random_cloud(n, 0, rng), pick(rng, 1, 6));
    std::vector<double> w(g.num_edges());
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (double& v : w) v = u(rng);
    const auto sim = SimilarityField::normalize(g.with_weights(std::move(w)));
    const auto report = compare_crf_vs_diffusion(cli::random_features(n, pick(rng, 1, 4), rng), sim, 1);
    step1 = std::max(step1, report.step1_max_diff);
  }
  const PointCloud two = cli::two_node_cloud();
  const SimilarityField sim(NeighborGraph(std::vector<std::vector<NodeIndex>>{{1}, {0}}, {{1.0}, {1.0}}));
  const auto report = compare_crf_vs_diffusion(two.features(), sim, 100);
  const double diff_err = (report.diffusion_final - FeatureMatrix::Ones(2, 1)).cwiseAbs().maxCoeff();
  FeatureMatrix crf_target(2, 1);
  crf_target << 2.0 / 3.0, 4.0 / 3.0;
  const double crf_err = (report.crf_final - crf_target).cwiseAbs().maxCoeff();
  return {step1 <= 1e-12 && diff_err <= 1e-8 && crf_err <= 1e-8,
          "step-1 diff " + fmt(step1) + ", two-node errors " + fmt(diff_err) + " / " + fmt(crf_err)};
}

FeatureMatrix random_simplex(std::size_t n, std::size_t l, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  FeatureMatrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index a = 0; a < p.cols(); ++a) p(i, a) = u(rng);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Outcome discrete_invariants() {
  std::mt19937_64 rng(107);
  double simplex = 0.0;
  double negative = 0.0;
  double zero_weight = 0.0;
  double shift = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = pick(rng, 1, 20);
    const std::size_t l = pick(rng, 2, 6);
    const auto g = cli::random_weighted_graph(n, 0.3, rng);
    std::vector<double> w(g.flat_weights().begin(), g.flat_weights().end());
    const FeatureMatrix p = random_simplex(n, l, rng);
    const Matrix c = 3.0 * cli::random_matrix(l, l, rng);
    const LabelField field(p);
    const FeatureMatrix q = discrete_crf_step(field, g, w, LabelCompatibility::from_matrix(c)).posterior();
    simplex = std::max(simplex, (q.rowwise().sum().array() - 1.0).abs().maxCoeff());
    negative = std::min(negative, q.minCoeff());

    const std::vector<double> zeros(w.size(), 0.0);
    zero_weight = std::max(
        zero_weight,
        (discrete_crf_step(field, g, zeros, LabelCompatibility::from_matrix(c)).posterior() - p).cwiseAbs().maxCoeff());

    const double alpha = std::normal_distribution<double>(0.0, 5.0)(rng);
    const Matrix shifted = (c.array() + alpha).matrix();
    shift = std::max(shift, (discrete_crf_step(field, g, w, LabelCompatibility::from_matrix(shifted)).posterior() - q)
                                .cwiseAbs()
                                .maxCoeff());
  }
  return {simplex <= 1e-12 && negative >= 0.0 && zero_weight <= 1e-12 && shift <= 1e-12,
          "row-sum err " + fmt(simplex) + ", zero-weight err " + fmt(zero_weight) + ", shift err " + fmt(shift)};
}

Outcome graph_oracles() {
  std::mt19937_64 rng(108);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = pick(rng, 1, 64);
    const auto cloud = cli::random_cloud(n, 0, rng);
    const auto& pos = cloud.positions();
    const std::size_t k = pick(rng, 1, 12);
    const std::size_t dil = pick(rng, 2, 4);
    const double r2 = std::uniform_real_distribution<double>(0.05, 4.0)(rng);
    if (knn_graph(cloud, k).lists() != oracle::knn(pos, k)) ++mismatches;
    if (dilated_knn_graph(cloud, k, dil).lists() != oracle::knn(pos, k, dil)) ++mismatches;
    if (radius_graph(cloud, r2).lists() != oracle::within(pos, r2)) ++mismatches;

    // FPS: replay the greedy rule with brute-force distances.
    const double ratio = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    const NodeIndex seed = pick(rng, 0, n - 1);
    const auto s = farthest_point_sample(cloud, ratio, seed);
    std::set<NodeIndex> chosen{seed};
    bool ok = !s.selected.empty() && s.selected[0] == seed &&
              s.selected.size() ==
                  std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9)));
    for (std::size_t t = 1; ok && t < s.selected.size(); ++t) {
      auto min_to_set = [&](NodeIndex j) {
        double best = INFINITY;
        for (NodeIndex c : chosen) best = std::min(best, oracle::dist2(pos, j, c));
        return best;
      };
      const double got = min_to_set(s.selected[t]);
      ok = !chosen.count(s.selected[t]);
      for (NodeIndex j = 0; ok && j < n; ++j) ok = chosen.count(j) || got >= min_to_set(j);
      chosen.insert(s.selected[t]);
    }
    if (!ok) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 400 checks"};
}

Outcome step_sweep() {
  const auto start = Clock::now();
  cli::RunConfig cfg;
  const auto rows = cli::run_sweep(cli::load_cloud(cfg), cfg);
  const double t = seconds_since(start);
  bool monotone = true;
  bool bounded = true;
  std::ostringstream detail;
  detail << "energy";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    detail << " " << rows[k].energy;
    if (k > 0 && rows[k].energy > rows[k - 1].energy) monotone = false;
    if (rows[k].steps >= 5 && rows[k].fidelity > rows[k].diffusion_fidelity) bounded = false;
  }
  detail << "; energy " << (monotone ? "non-increasing" : "increases") << ", fidelity "
         << (bounded ? "within" : "above") << " diffusion for T>=5, " << fmt(t) << " s";
  return {monotone && bounded && t < 30.0, detail.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Files of a run directory except the timing table, keyed by name.
std::vector<std::pair<std::string, std::string>> run_files(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() == "sweep_timing.csv") continue;
    out.emplace_back(e.path().filename().string(), slurp(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism(const std::string& exe, const fs::path& scratch) {
  const std::vector<std::pair<std::string, std::string>> commands{
      {"build-graph", "--sample-ratio 0.5"},
      {"smooth", "-T 10 --check-exact"},
      {"smooth-gs", "-T 10 --schedule gauss-seidel"},
      {"refine-labels", "--fixture two-cluster --points 200"},
      {"diffuse-compare", "--diffusion-steps 20"},
      {"sweep-steps", ""},
      {"check-oracle", ""},
  };
  std::size_t runs = 0;
  std::vector<std::string> differing;
  for (const auto& [name, args] : commands) {
    const std::string sub = name == "smooth-gs" ? "smooth" : name;
    std::vector<std::vector<std::pair<std::string, std::string>>> results;
    for (const int threads : {1, 1, 4}) {
      const fs::path dir = scratch / (name + "_" + std::to_string(runs++));
      fs::remove_all(dir);
      fs::create_directories(dir);
      const std::string cmd = "\"" + exe + "\" " + sub + " " + args + " --seed 3 --threads " + std::to_string(threads) +
                              " -o \"" + dir.string() + "\" > \"" + (dir / "stdout.txt").string() + "\" 2> \"" +
                              (dir / "stderr.txt").string() + "\"";
      const int status = std::system(cmd.c_str());
      if (status != 0) differing.push_back(name + " (exit " + std::to_string(status) + ")");
      results.push_back(run_files(dir));
      results.back().emplace_back("exit", std::to_string(status));
    }
    if (results[0] != results[1] || results[0] != results[2]) differing.push_back(name);
    if (results[0].size() <= 3) differing.push_back(name + " (no output)");
  }
  std::string detail = std::to_string(commands.size()) + " commands x 3 runs (threads 1, 1, 4)";
  for (const auto& d : differing) detail += ", differs: " + d;
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: crfconv_acceptance <crfconv executable> <scratch dir> [--known-failure N ...]\n";
    return 2;
  }
  const std::string exe = argv[1];
  const fs::path scratch = argv[2];
  std::set<int> known;
  for (int a = 3; a + 1 < argc; a += 2) {
    if (std::string(argv[a]) == "--known-failure") known.insert(std::atoi(argv[a + 1]));
  }
  fs::create_directories(scratch);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"message passing matches the exact solve", exact_solve},
      {"mean-field means equal coordinate descent", mean_field_equivalence},
      {"gauss-seidel energy is non-increasing", gauss_seidel_monotone},
      {"mean-field covariance", covariance},
      {"gradients match finite differences", gradients},
      {"diffusion correspondence", diffusion_correspondence},
      {"discrete CRF invariants", discrete_invariants},
      {"graph construction oracles", graph_oracles},
      {"mean-field step sweep", step_sweep},
      {"CLI determinism", [&] { return determinism(exe, scratch); }},
  };
  int unexpected = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[k].first << ": " << o.detail;
    if (!o.pass && known.count(id)) std::cout << " [known failure]";
    std::cout << std::endl;
    if (!o.pass && !known.count(id)) ++unexpected;
  }
  return unexpected;
}

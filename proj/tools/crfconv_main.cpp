// crfconv: graph building, CRF smoothing, label refinement, diffusion
// comparison, step sweeps and oracle checks on point clouds.

#include <cmath>
#include <iostream>
#include <limits>
#include <optional>

#include "CLI11.hpp"
#include "cli/commands.hpp"
#include "crfconv/parallel.hpp"
#include "crfconv/text.hpp"

namespace {

using crfconv::cli::RunConfig;

/// Flag values that override the config file when given.
struct Overrides {
  std::string config;
  std::string input;
  std::string input_format;
  std::string probabilities;
  std::string output_dir;
  std::string output_format;
  std::size_t k = 0;
  std::size_t dilation = 0;
  double radius = 0.0;
  double sample_ratio = 0.0;
  std::size_t steps = 0;
  std::string schedule;
  std::string tol;
  double epsilon = 0.0;
  std::string transforms;
  std::string activation;
  std::size_t discrete_steps = 0;
  std::string label_compat;
  std::string kernel;
  double diffusion_c = 0.0;
  std::size_t diffusion_steps = 0;
  std::vector<std::size_t> sweep;
  std::string fixture;
  std::size_t points = 0;
  std::uint64_t seed = 0;
  int threads = 0;
  bool check_exact = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON run configuration");
  sub->add_option("-i,--input", o.input, "input cloud (.ply or .csv)");
  sub->add_option("--input-format", o.input_format, "ply or csv; default from the extension");
  sub->add_option("-o,--output-dir", o.output_dir, "directory for all output files");
  sub->add_option("--output-format", o.output_format, "ply or csv for cloud outputs");
  sub->add_option("-k,--k", o.k, "neighbors per point");
  sub->add_option("--dilation", o.dilation, "dilation of the kNN ranks");
  sub->add_option("--radius", o.radius, "radius graph instead of kNN");
  sub->add_option("--fixture", o.fixture, "synthetic input when no --input: three-cluster, two-cluster, two-node");
  sub->add_option("--points", o.points, "size of the synthetic fixture");
  sub->add_option("--seed", o.seed, "seed for sampling and synthetic fixtures");
  sub->add_option("--threads", o.threads, "cap on worker threads (0 = runtime default)");
}

void add_crf(CLI::App* sub, Overrides& o) {
  sub->add_option("-T,--steps", o.steps, "mean-field steps");
  sub->add_option("--schedule", o.schedule, "jacobi or gauss-seidel");
  sub->add_option("--tol", o.tol, "early-stop tolerance (number or inf)");
  sub->add_option("--epsilon", o.epsilon, "ridge added to the learned compatibility");
  sub->add_option("--transforms", o.transforms, "weight file with 'unary' and 'projection' transforms");
  sub->add_option("--activation", o.activation, "readout: identity, relu, leaky-relu");
}

RunConfig resolve(CLI::App* sub, const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : crfconv::cli::load_config(o.config);
  crfconv::cli::apply_environment(cfg);
  auto given = [sub](const char* name) { return sub->get_option_no_throw(name) && sub->count(name) > 0; };
  if (given("--input")) cfg.input.cloud = o.input;
  if (given("--input-format")) cfg.input.format = crfconv::parse_cloud_format(o.input_format);
  if (given("--probabilities")) cfg.input.probabilities = o.probabilities;
  if (given("--output-dir")) cfg.output.dir = o.output_dir;
  if (given("--output-format")) cfg.output.format = crfconv::parse_cloud_format(o.output_format);
  if (given("--k")) cfg.graph.k = o.k;
  if (given("--dilation")) cfg.graph.dilation = o.dilation;
  if (given("--radius")) cfg.graph.radius = o.radius;
  if (given("--sample-ratio")) cfg.graph.sample_ratio = o.sample_ratio;
  if (given("--steps")) cfg.crf.steps = o.steps;
  if (given("--schedule")) cfg.crf.schedule = crfconv::parse_schedule(o.schedule);
  if (given("--tol")) {
    cfg.crf.tol = (o.tol == "inf" || o.tol == "infinity") ? std::numeric_limits<double>::infinity()
                                                          : crfconv::parse_number(o.tol, 0);
  }
  if (given("--epsilon")) cfg.crf.epsilon = o.epsilon;
  if (given("--transforms")) cfg.crf.transforms = o.transforms;
  if (given("--activation")) cfg.crf.activation = o.activation;
  if (given("--discrete-steps")) cfg.discrete.steps = o.discrete_steps;
  if (given("--label-compat")) cfg.discrete.compat = o.label_compat;
  if (given("--kernel")) cfg.discrete.kernel = o.kernel;
  if (given("--diffusion-c")) cfg.diffusion.c = o.diffusion_c;
  if (given("--diffusion-steps")) cfg.diffusion.steps = o.diffusion_steps;
  if (given("--sweep")) cfg.sweep_steps = o.sweep;
  if (given("--fixture")) cfg.fixture.kind = o.fixture;
  if (given("--points")) cfg.fixture.points = o.points;
  if (given("--seed")) cfg.seed = o.seed;
  if (given("--threads")) cfg.threads = o.threads;
  if (given("--check-exact")) cfg.check_exact = o.check_exact;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous and discrete CRF graph convolution on point clouds"};
  app.require_subcommand(1);
  Overrides o;

  auto* build = app.add_subcommand("build-graph", "write the neighbor graph as an edge list");
  add_common(build, o);
  build->add_option("--sample-ratio", o.sample_ratio, "farthest-point subsampling ratio before building the graph");

  auto* smooth = app.add_subcommand("smooth", "run the continuous CRF convolution on the input features");
  add_common(smooth, o);
  add_crf(smooth, o);
  smooth->add_flag("--check-exact", o.check_exact, "compare against the closed-form solution");

  auto* refine = app.add_subcommand("refine-labels", "discrete CRF refinement of label probabilities");
  add_common(refine, o);
  refine->add_option("-p,--probabilities", o.probabilities, "CSV of per-point label probabilities");
  refine->add_option("--discrete-steps", o.discrete_steps, "mean-field steps");
  refine->add_option("--label-compat", o.label_compat, "identity or potts-complement");
  refine->add_option("--kernel", o.kernel, "kernel mixture weight file");

  auto* diffuse = app.add_subcommand("diffuse-compare", "compare the CRF against graph diffusion");
  add_common(diffuse, o);
  add_crf(diffuse, o);
  diffuse->add_option("--diffusion-steps", o.diffusion_steps, "steps of both processes");

  auto* sweep = app.add_subcommand("sweep-steps", "energy and fidelity across mean-field step counts");
  add_common(sweep, o);
  add_crf(sweep, o);
  sweep->add_option("--sweep", o.sweep, "step counts, e.g. --sweep 1 2 5 10")->delimiter(',');
  sweep->add_option("--diffusion-c", o.diffusion_c, "diffusion coefficient of the baseline");

  auto* oracle = app.add_subcommand("check-oracle", "run the built-in oracle checks on random instances");
  add_common(oracle, o);

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    const RunConfig cfg = resolve(sub, o);
    crfconv::set_num_threads(cfg.threads);
    if (sub == build) crfconv::cli::cmd_build_graph(cfg, std::cerr);
    if (sub == smooth) crfconv::cli::cmd_smooth(cfg, std::cerr);
    if (sub == refine) crfconv::cli::cmd_refine_labels(cfg, std::cerr);
    if (sub == diffuse) crfconv::cli::cmd_diffuse_compare(cfg, std::cerr);
    if (sub == sweep) crfconv::cli::cmd_sweep_steps(cfg, std::cerr);
    if (sub == oracle) return crfconv::cli::cmd_check_oracle(cfg, std::cerr) == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

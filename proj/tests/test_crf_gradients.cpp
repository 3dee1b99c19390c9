#include <gtest/gtest.h>

#include <random>

#include "cli/fixtures.hpp"
#include "crfconv/crf_continuous.hpp"
#include "oracles.hpp"

using namespace crfconv;

namespace {

constexpr double kStepScale = 1e-5;

struct Instance {
  FeatureMatrix input;
  FeatureMatrix guide;
  NeighborGraph graph;
  PointwiseTransform unary;
  PointwiseTransform projection;
  CrfConfig cfg;
  FeatureMatrix upstream;
};

double loss(const Instance& s) {
  const auto out = crf_convolve(s.input, s.graph, s.unary, s.projection, s.guide, s.cfg).output;
  return (out.array() * s.upstream.array()).sum();
}

double fd_step(const Vector& x) { return kStepScale * std::max(1.0, x.cwiseAbs().maxCoeff()); }

Instance random_instance(std::mt19937_64& rng, std::size_t steps) {
  const std::size_t n = 2 + rng() % 11;
  const std::size_t d_in = 1 + rng() % 4;
  const std::size_t d = 1 + rng() % 4;
  const std::size_t d_guide = 1 + rng() % 3;
  const auto cloud = cli::random_cloud(n, d_guide, rng);
  Instance s{cli::random_features(n, d_in, rng),
             cloud.features(),
             knn_graph(cloud, 1 + rng() % 4),
             PointwiseTransform({{cli::random_matrix(d, d_in, rng), cli::random_matrix(d, 1, rng),
                                  Activation::leaky_relu(0.2)},
                                 {cli::random_matrix(d, d, rng), cli::random_matrix(d, 1, rng), Activation::identity()}}),
             PointwiseTransform({{0.7 * cli::random_matrix(2, d_guide, rng), cli::random_matrix(2, 1, rng),
                                  Activation::identity()}}),
             CrfConfig{},
             cli::random_features(n, d, rng)};
  s.cfg.steps = steps;
  s.cfg.compat = CompatibilityMatrix::from_factor(cli::random_matrix(d, d, rng) * 0.6);
  s.cfg.readout = Activation::identity();
  s.cfg.record_energy = false;
  return s;
}

}  // namespace

TEST(CrfGradients, TwoNodeIdentityCase) {
  const PointCloud cloud = cli::two_node_cloud();
  Instance s{cloud.features(), cloud.features(), knn_graph(cloud, 1), PointwiseTransform::identity(),
             PointwiseTransform::identity(), CrfConfig{}, FeatureMatrix::Ones(2, 1)};
  s.cfg.steps = 1;
  const auto grads = crf_gradients(s.input, s.graph, s.unary, s.projection, s.guide, s.cfg, s.upstream);
  const Vector fd = oracle::central_difference(
      [&](const Vector& v) {
        Instance t = s;
        t.input = oracle::unflat(v, 2, 1);
        return loss(t);
      },
      oracle::flat(s.input), fd_step(oracle::flat(s.input)));
  EXPECT_LE(oracle::relative_error(oracle::flat(grads.input), fd), 1e-5);
  EXPECT_EQ(grads.compat_factor.size(), 0);
}

TEST(CrfGradients, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(1);
  auto s = random_instance(rng, 3);
  s.upstream.setZero();
  const auto g = crf_gradients(s.input, s.graph, s.unary, s.projection, s.guide, s.cfg, s.upstream);
  EXPECT_EQ(g.input.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.guide.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(PointwiseTransform::flatten(g.unary).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(PointwiseTransform::flatten(g.projection).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.compat_factor.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CrfGradients, RejectsUnsupportedSchedules) {
  std::mt19937_64 rng(2);
  auto s = random_instance(rng, 2);
  s.cfg.schedule = Schedule::GaussSeidel;
  EXPECT_THROW(crf_gradients(s.input, s.graph, s.unary, s.projection, s.guide, s.cfg, s.upstream),
               UnsupportedConfiguration);
  s.cfg.schedule = Schedule::Jacobi;
  s.cfg.convergence_tol = 1e-6;
  EXPECT_THROW(crf_gradients(s.input, s.graph, s.unary, s.projection, s.guide, s.cfg, s.upstream),
               UnsupportedConfiguration);
  s.cfg.convergence_tol = 0.0;
  s.upstream = FeatureMatrix::Zero(1, 1);
  EXPECT_THROW(crf_gradients(s.input, s.graph, s.unary, s.projection, s.guide, s.cfg, s.upstream), ShapeError);
}

TEST(CrfGradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = random_instance(rng, trial % 2 == 0 ? 1 : 3);
    if (trial % 3 == 2) s.cfg.readout = Activation::leaky_relu(0.1);
    const auto g = crf_gradients(s.input, s.graph, s.unary, s.projection, s.guide, s.cfg, s.upstream);
    const auto rows = s.input.rows();

    const Vector x = oracle::flat(s.input);
    const Vector fd_input = oracle::central_difference(
        [&](const Vector& v) {
          Instance t = s;
          t.input = oracle::unflat(v, rows, s.input.cols());
          return loss(t);
        },
        x, fd_step(x));
    EXPECT_LE(oracle::relative_error(oracle::flat(g.input), fd_input), 1e-5) << "input, trial " << trial;

    const Vector gx = oracle::flat(s.guide);
    const Vector fd_guide = oracle::central_difference(
        [&](const Vector& v) {
          Instance t = s;
          t.guide = oracle::unflat(v, rows, s.guide.cols());
          return loss(t);
        },
        gx, fd_step(gx));
    EXPECT_LE(oracle::relative_error(oracle::flat(g.guide), fd_guide), 1e-5) << "guide, trial " << trial;

    const Vector tu = s.unary.flatten_parameters();
    const Vector fd_unary = oracle::central_difference(
        [&](const Vector& v) {
          Instance t = s;
          t.unary.assign_parameters(v);
          return loss(t);
        },
        tu, fd_step(tu));
    EXPECT_LE(oracle::relative_error(PointwiseTransform::flatten(g.unary), fd_unary), 1e-5) << "unary, trial " << trial;

    const Vector tp = s.projection.flatten_parameters();
    const Vector fd_proj = oracle::central_difference(
        [&](const Vector& v) {
          Instance t = s;
          t.projection.assign_parameters(v);
          return loss(t);
        },
        tp, fd_step(tp));
    EXPECT_LE(oracle::relative_error(PointwiseTransform::flatten(g.projection), fd_proj), 1e-5)
        << "projection, trial " << trial;

    const Matrix factor = s.cfg.compat->factor();
    const double eps = s.cfg.compat->epsilon();
    const Vector cf = Eigen::Map<const Vector>(factor.data(), factor.size());
    const Vector fd_c = oracle::central_difference(
        [&](const Vector& v) {
          Instance t = s;
          t.cfg.compat = CompatibilityMatrix::from_factor(Eigen::Map<const Matrix>(v.data(), factor.rows(), factor.cols()),
                                                          eps);
          return loss(t);
        },
        cf, fd_step(cf));
    const Vector gc = Eigen::Map<const Vector>(g.compat_factor.data(), g.compat_factor.size());
    EXPECT_LE(oracle::relative_error(gc, fd_c), 1e-5) << "compat, trial " << trial;
  }
}

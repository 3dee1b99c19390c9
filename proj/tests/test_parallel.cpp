#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "cli/fixtures.hpp"
#include "crfconv/crf_discrete.hpp"
#include "crfconv/diffusion.hpp"
#include "crfconv/parallel.hpp"
#include "crfconv/reference.hpp"

using namespace crfconv;

namespace {

bool bitwise_equal(const FeatureMatrix& a, const FeatureMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

class ThreadGuard {
public:
  ~ThreadGuard() { set_num_threads(0); }
};

struct Outputs {
  NeighborGraph graph;
  std::vector<double> sim;
  FeatureMatrix crf;
  FeatureMatrix diffusion;
  FeatureMatrix discrete;
};

Outputs run_all(const PointCloud& cloud, const FeatureMatrix& z, const CompatibilityMatrix& compat) {
  Outputs o;
  o.graph = knn_graph(cloud, 10);
  const auto sim = pairwise_similarity(cloud.features(), o.graph, PointwiseTransform::identity());
  o.sim.assign(sim.graph().flat_weights().begin(), sim.graph().flat_weights().end());
  CrfConfig cfg;
  cfg.steps = 8;
  cfg.compat = compat;
  o.crf = run_crf(ContinuousCrfState::start(z), sim, cfg).latent;
  o.diffusion = diffuse_to_steady(z, sim.graph(), 0.5, 1e-9, 50).h;
  FeatureMatrix p = (z.array() - z.minCoeff() + 0.1).matrix();
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
  o.discrete = discrete_crf_infer(p, cloud.features(), o.graph, KernelMixture::unit(),
                                  LabelCompatibility::potts_complement(static_cast<std::size_t>(p.cols())), 4)
                   .posterior();
  return o;
}

}  // namespace

TEST(ReferenceParity, KnnGraph) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cloud = cli::random_cloud(1 + rng() % 200, 0, rng);
    const std::size_t k = 1 + rng() % 20;
    EXPECT_EQ(knn_graph(cloud, k), reference::knn_graph(cloud, k));
  }
}

TEST(ReferenceParity, Similarity) {
  std::mt19937_64 rng(2);
  const auto cloud = cli::random_cloud(150, 4, rng);
  const auto g = knn_graph(cloud, 12);
  const auto sim = pairwise_similarity(cloud.features(), g, PointwiseTransform::identity());
  const auto ref = reference::similarity_weights(cloud.features(), g);
  ASSERT_EQ(ref.size(), sim.graph().num_edges());
  for (std::size_t e = 0; e < ref.size(); ++e) EXPECT_NEAR(sim.graph().flat_weights()[e], ref[e], 1e-15);
}

TEST(ReferenceParity, CrfJacobiStep) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng() % 100;
    const std::size_t d = 1 + rng() % 8;
    const auto sim = SimilarityField::normalize(cli::random_weighted_graph(n, 0.1, rng));
    const FeatureMatrix z = cli::random_features(n, d, rng);
    const FeatureMatrix x = cli::random_features(n, d, rng);
    for (const auto& compat :
         {CompatibilityMatrix::identity(d), CompatibilityMatrix::from_factor(cli::random_matrix(d, d, rng))}) {
      CrfConfig cfg;
      cfg.compat = compat;
      cfg.record_energy = false;
      const auto got = crf_step(ContinuousCrfState{z, x, {}, 0, {}}, sim, cfg).latent;
      const auto want = reference::crf_jacobi_step(z, x, sim, compat.realized());
      EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + want.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(ReferenceParity, DiffusionStep) {
  std::mt19937_64 rng(4);
  const auto sim = SimilarityField::normalize(cli::random_weighted_graph(120, 0.05, rng));
  const FeatureMatrix h = cli::random_features(120, 3, rng);
  for (double c : {0.1, 0.5, 1.0}) {
    EXPECT_LE((diffusion_step(h, sim.graph(), c) - reference::diffusion_step(h, sim.graph(), c)).cwiseAbs().maxCoeff(),
              1e-14);
  }
}

TEST(ReferenceParity, DiscreteStep) {
  std::mt19937_64 rng(5);
  const std::size_t n = 80;
  const auto g = cli::random_weighted_graph(n, 0.1, rng);
  std::vector<double> w(g.flat_weights().begin(), g.flat_weights().end());
  FeatureMatrix p = cli::random_features(n, 4, rng).array().abs() + 0.01;
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
  const Matrix c = cli::random_matrix(4, 4, rng);
  const auto got = discrete_crf_step(LabelField(p), g, w, LabelCompatibility::from_matrix(c)).posterior();
  EXPECT_LE((got - reference::discrete_crf_step(p, p, g, w, c)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Determinism, BitwiseIndependentOfThreadCount) {
  ThreadGuard guard;
  std::mt19937_64 rng(6);
  const auto cloud = cli::random_cloud(400, 3, rng);
  const FeatureMatrix z = cli::random_features(400, 3, rng);
  const auto compat = CompatibilityMatrix::from_factor(cli::random_matrix(3, 3, rng));

  set_num_threads(1);
  const Outputs one = run_all(cloud, z, compat);
  for (int threads : {2, 3, 7}) {
    set_num_threads(threads);
    const Outputs many = run_all(cloud, z, compat);
    EXPECT_EQ(many.graph, one.graph);
    EXPECT_EQ(many.sim, one.sim);
    EXPECT_TRUE(bitwise_equal(many.crf, one.crf)) << threads << " threads";
    EXPECT_TRUE(bitwise_equal(many.diffusion, one.diffusion)) << threads << " threads";
    EXPECT_TRUE(bitwise_equal(many.discrete, one.discrete)) << threads << " threads";
  }
}

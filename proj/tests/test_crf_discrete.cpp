#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cli/fixtures.hpp"
#include "crfconv/crf_discrete.hpp"
#include "oracles.hpp"

using namespace crfconv;

namespace {

using Lists = std::vector<std::vector<NodeIndex>>;

FeatureMatrix random_simplex_rows(std::size_t n, std::size_t labels, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(0.7, 1.0);
  FeatureMatrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(labels));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index l = 0; l < p.cols(); ++l) p(i, l) = g(rng) + 1e-9;
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

std::vector<double> random_edge_weights(const NeighborGraph& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> w(g.num_edges());
  for (double& v : w) v = u(rng);
  return w;
}

// q_i(l) proportional to p_i(l) * exp(-sum_l' C(l,l') m_i(l')), written as
// plain loops without the log-space or max-subtraction tricks.
FeatureMatrix brute_force_step(const FeatureMatrix& p, const FeatureMatrix& q, const NeighborGraph& g,
                               const std::vector<double>& w, const Matrix& c) {
  FeatureMatrix out(p.rows(), p.cols());
  std::size_t e = 0;
  for (NodeIndex i = 0; i < g.num_nodes(); ++i) {
    std::vector<double> m(static_cast<std::size_t>(p.cols()), 0.0);
    for (NodeIndex j : g.neighbors(i)) {
      for (Eigen::Index l = 0; l < p.cols(); ++l) m[static_cast<std::size_t>(l)] += w[e] * q(static_cast<Eigen::Index>(j), l);
      ++e;
    }
    double z = 0.0;
    for (Eigen::Index l = 0; l < p.cols(); ++l) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < p.cols(); ++k) s += c(l, k) * m[static_cast<std::size_t>(k)];
      out(static_cast<Eigen::Index>(i), l) = std::max(p(static_cast<Eigen::Index>(i), l), kUnaryFloor) * std::exp(-s);
      z += out(static_cast<Eigen::Index>(i), l);
    }
    out.row(static_cast<Eigen::Index>(i)) /= z;
  }
  return out;
}

}  // namespace

TEST(LabelField, ValidatesRows) {
  EXPECT_NO_THROW(LabelField(FeatureMatrix{{0.5, 0.5}, {1.0, 0.0}}));
  try {
    LabelField(FeatureMatrix{{0.5, 0.5}, {0.7, 0.2}});
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
  EXPECT_THROW(LabelField(FeatureMatrix{{1.2, -0.2}}), InvariantError);
  EXPECT_THROW(LabelField(FeatureMatrix{{1.0, 0.0}}, FeatureMatrix{{1.0, 0.0}, {0.0, 1.0}}), ShapeError);
}

TEST(LabelField, HardLabelsBreakTiesLow) {
  const LabelField f(FeatureMatrix{{0.5, 0.5}, {0.2, 0.8}, {0.6, 0.4}});
  EXPECT_EQ(f.hard_labels(), (std::vector<std::size_t>{0, 1, 0}));
}

TEST(KernelWeights, HandValues) {
  const NeighborGraph g(Lists{{1}, {0}});
  EXPECT_NEAR(kernel_weights(FeatureMatrix{{0.0}, {1.0}}, g, KernelMixture::unit())[0], std::exp(-1.0), 1e-15);
  EXPECT_EQ(kernel_weights(FeatureMatrix{{3.0}, {3.0}}, g, KernelMixture::unit())[0], 1.0);
  const KernelMixture two{{PointwiseTransform::identity(), PointwiseTransform::linear(Matrix::Constant(1, 1, 3.0))},
                          {0.5, 0.5}};
  EXPECT_EQ(kernel_weights(FeatureMatrix{{3.0}, {3.0}}, g, two)[0], 1.0);
  EXPECT_NEAR(kernel_weights(FeatureMatrix{{0.0}, {1.0}}, g, two)[0], 0.5 * std::exp(-1.0) + 0.5 * std::exp(-9.0), 1e-15);
}

TEST(KernelWeights, FromTransformFile) {
  const auto named = parse_transforms(
      "transform kernel0 0\n"
      "transform kernel1 1\nlayer 1 1 identity\n2\n0\n"
      "transform mixture 1\nlayer 2 1 identity\n0.25 -0.5\n7\n");
  const auto mix = KernelMixture::from_transforms(named);
  ASSERT_EQ(mix.weights, (std::vector<double>{0.25, -0.5}));
  EXPECT_TRUE(mix.has_negative_weights());
  const double w = kernel_weights(FeatureMatrix{{0.0}, {1.0}}, NeighborGraph(Lists{{1}, {}}), mix)[0];
  EXPECT_NEAR(w, 0.25 * std::exp(-1.0) - 0.5 * std::exp(-4.0), 1e-15);
  EXPECT_THROW(KernelMixture::from_transforms(parse_transforms("transform mixture 0\n")), std::invalid_argument);
  EXPECT_THROW(kernel_weights(FeatureMatrix::Zero(3, 1), NeighborGraph(Lists{{1}, {}}), mix), ShapeError);
}

TEST(LabelCompatibility, Presets) {
  EXPECT_EQ(LabelCompatibility::preset("identity", 3).matrix(), Matrix::Identity(3, 3));
  EXPECT_EQ(LabelCompatibility::preset("potts-complement", 3).matrix(), Matrix::Ones(3, 3) - Matrix::Identity(3, 3));
  EXPECT_THROW(LabelCompatibility::preset("dense", 3), std::invalid_argument);
  EXPECT_THROW(LabelCompatibility::from_matrix(Matrix::Ones(2, 3)), ShapeError);
}

TEST(DiscreteStep, TwoNodeHandSoftmax) {
  const LabelField f(FeatureMatrix{{0.9, 0.1}, {0.6, 0.4}});
  const NeighborGraph g(Lists{{1}, {0}});
  const std::vector<double> w{1.0, 1.0};
  const auto q = discrete_crf_step(f, g, w, LabelCompatibility::identity(2)).posterior();
  const double a = std::exp(std::log(0.9) - 0.6);
  const double b = std::exp(std::log(0.1) - 0.4);
  EXPECT_NEAR(q(0, 0), a / (a + b), 1e-15);
  EXPECT_NEAR(q(0, 0), 0.8805, 5e-5);
  EXPECT_NEAR(q(0, 1), 0.1195, 5e-5);
}

TEST(DiscreteStep, ZeroWeightsKeepUnaries) {
  std::mt19937_64 rng(1);
  const auto cloud = cli::random_cloud(20, 0, rng);
  const auto g = knn_graph(cloud, 5);
  const FeatureMatrix p = random_simplex_rows(20, 4, rng);
  const std::vector<double> zero(g.num_edges(), 0.0);
  const auto q = discrete_crf_step(LabelField(p), g, zero, LabelCompatibility::potts_complement(4)).posterior();
  EXPECT_LE((q - p).cwiseAbs().maxCoeff(), 1e-15);

  const auto empty = discrete_crf_infer(p, cloud.features(), NeighborGraph(Lists(20)), KernelMixture::unit(),
                                        LabelCompatibility::identity(4), 7);
  EXPECT_LE((empty.posterior() - p).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DiscreteStep, MatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 30;
    const std::size_t labels = 2 + rng() % 5;
    const auto g = cli::random_weighted_graph(n, 0.3, rng);
    const auto w = random_edge_weights(g, rng);
    const FeatureMatrix p = random_simplex_rows(n, labels, rng);
    const FeatureMatrix q = random_simplex_rows(n, labels, rng);
    const Matrix c = cli::random_matrix(labels, labels, rng);
    const auto got = discrete_crf_step(LabelField(p, q), g, w, LabelCompatibility::from_matrix(c)).posterior();
    EXPECT_LE((got - brute_force_step(p, q, g, w, c)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DiscreteStep, StaysOnTheSimplex) {
  std::mt19937_64 rng(3);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 12;
    const std::size_t labels = 2 + rng() % 4;
    const auto g = cli::random_weighted_graph(n, 0.4, rng);
    auto w = random_edge_weights(g, rng);
    for (double& v : w) v *= 20.0;
    const Matrix c = 5.0 * cli::random_matrix(labels, labels, rng);
    const auto q = discrete_crf_step(LabelField(random_simplex_rows(n, labels, rng)), g, w,
                                     LabelCompatibility::from_matrix(c))
                       .posterior();
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      failures += q.row(i).minCoeff() < 0.0 || std::abs(q.row(i).sum() - 1.0) > 1e-9;
    }
  }
  EXPECT_EQ(failures, 0);
}

TEST(DiscreteStep, AllOnesShiftInvariance) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 20;
    const std::size_t labels = 2 + rng() % 4;
    const auto g = cli::random_weighted_graph(n, 0.4, rng);
    const auto w = random_edge_weights(g, rng);
    const LabelField f(random_simplex_rows(n, labels, rng), random_simplex_rows(n, labels, rng));
    const Matrix c = cli::random_matrix(labels, labels, rng);
    const double alpha = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
    const Matrix shifted = c + alpha * Matrix::Ones(labels, labels);
    const auto a = discrete_crf_step(f, g, w, LabelCompatibility::from_matrix(c)).posterior();
    const auto b = discrete_crf_step(f, g, w, LabelCompatibility::from_matrix(shifted)).posterior();
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DiscreteStep, PermutationEquivariance) {
  std::mt19937_64 rng(5);
  const std::size_t n = 15;
  const std::size_t labels = 4;
  const auto g = cli::random_weighted_graph(n, 0.3, rng);
  const auto w = random_edge_weights(g, rng);
  const FeatureMatrix p = random_simplex_rows(n, labels, rng);
  const Matrix c = cli::random_matrix(labels, labels, rng);
  const auto base = discrete_crf_step(LabelField(p), g, w, LabelCompatibility::from_matrix(c)).posterior();

  std::vector<NodeIndex> node(n);
  std::iota(node.begin(), node.end(), 0);
  std::shuffle(node.begin(), node.end(), rng);
  std::vector<Eigen::Index> label(labels);
  std::iota(label.begin(), label.end(), 0);
  std::shuffle(label.begin(), label.end(), rng);

  Lists lists(n);
  std::vector<std::vector<double>> weights(n);
  std::size_t e = 0;
  for (NodeIndex i = 0; i < n; ++i) {
    for (NodeIndex j : g.neighbors(i)) {
      lists[node[i]].push_back(node[j]);
      weights[node[i]].push_back(w[e++]);
    }
  }
  const NeighborGraph pg(lists, weights);
  std::vector<double> pw(pg.flat_weights().begin(), pg.flat_weights().end());
  FeatureMatrix pp(p.rows(), p.cols());
  Matrix pc(c.rows(), c.cols());
  for (std::size_t l = 0; l < labels; ++l) {
    for (std::size_t k = 0; k < labels; ++k) pc(label[l], label[k]) = c(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
  }
  for (NodeIndex i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < labels; ++l) pp(static_cast<Eigen::Index>(node[i]), label[l]) = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
  }
  const auto moved = discrete_crf_step(LabelField(pp), pg, pw, LabelCompatibility::from_matrix(pc)).posterior();
  for (NodeIndex i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < labels; ++l) {
      EXPECT_NEAR(moved(static_cast<Eigen::Index>(node[i]), label[l]), base(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)),
                  1e-14);
    }
  }
}

TEST(DiscreteInfer, PlantedTwoClusterFlips) {
  const auto fx = cli::two_cluster_labels(120, 0.15, 7);
  const auto g = knn_graph(fx.cloud, 8);
  const FeatureMatrix pos = fx.cloud.positions();
  const auto compat = LabelCompatibility::potts_complement(2);

  const auto one = discrete_crf_infer(fx.probabilities, pos, g, KernelMixture::unit(), compat, 1);
  const auto w = kernel_weights(pos, g, KernelMixture::unit());
  const FeatureMatrix oracle_q = brute_force_step(fx.probabilities, fx.probabilities, g, w, compat.matrix());
  EXPECT_LE((one.posterior() - oracle_q).cwiseAbs().maxCoeff(), 1e-12);

  std::size_t flipped = 0, corrupted = 0;
  const auto labels = one.hard_labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t oracle_label = oracle_q(static_cast<Eigen::Index>(i), 1) > oracle_q(static_cast<Eigen::Index>(i), 0);
    EXPECT_EQ(labels[i], oracle_label);
    if (fx.corrupted[i]) {
      ++corrupted;
      flipped += labels[i] == fx.truth[i];
    } else {
      EXPECT_EQ(labels[i], fx.truth[i]) << "clean point " << i << " flipped";
    }
  }
  ASSERT_GT(corrupted, 0u);
  EXPECT_EQ(flipped, corrupted);
  EXPECT_THROW(discrete_crf_infer(fx.probabilities, pos, g, KernelMixture::unit(), compat, 0), std::invalid_argument);
}

TEST(DiscreteInfer, OutputsStayOnSimplex) {
  std::mt19937_64 rng(6);
  const auto cloud = cli::random_cloud(40, 3, rng);
  const auto q = discrete_crf_infer(random_simplex_rows(40, 3, rng), cloud.features(), knn_graph(cloud, 6),
                                    KernelMixture::unit(), LabelCompatibility::potts_complement(3), 10)
                     .posterior();
  EXPECT_NO_THROW(check_simplex_rows(q, 1e-9, "posterior"));
}

TEST(Softmax, FloorsZeroProbabilities) {
  Eigen::RowVectorXd p(3);
  p << 0.0, 0.5, 0.5;
  const auto q = softmax_log_unary(p, Eigen::RowVectorXd::Zero(3));
  EXPECT_GT(q(0), 0.0);
  EXPECT_LT(q(0), 1e-11);
  EXPECT_NEAR(q.sum(), 1.0, 1e-15);
}

// Serial reference kernels against the OpenMP kernels on a three-cluster cloud.
// Argument: number of points.

#include <benchmark/benchmark.h>

#include <map>

#include "cli/fixtures.hpp"
#include "crfconv/crf_discrete.hpp"
#include "crfconv/diffusion.hpp"
#include "crfconv/reference.hpp"

using namespace crfconv;

namespace {

constexpr std::size_t kNeighbors = 16;

struct Scene {
  PointCloud cloud;
  NeighborGraph graph;
  SimilarityField sim;
  CompatibilityMatrix compat = CompatibilityMatrix::identity(3);
  FeatureMatrix probabilities;

  explicit Scene(std::size_t n)
      : cloud(cli::three_cluster_cloud(n, 0.3, 0).cloud),
        graph(knn_graph(cloud, kNeighbors)),
        sim(pairwise_similarity(cloud.features(), graph, PointwiseTransform::identity())) {
    std::mt19937_64 rng(1);
    compat = CompatibilityMatrix::from_factor(cli::random_matrix(3, 3, rng));
    probabilities = (cloud.features().array() - cloud.features().minCoeff() + 0.1).matrix();
    for (Eigen::Index i = 0; i < probabilities.rows(); ++i) probabilities.row(i) /= probabilities.row(i).sum();
  }
};

const Scene& scene(std::size_t n) {
  static std::map<std::size_t, Scene> cache;
  return cache.try_emplace(n, n).first->second;
}

void BM_KnnSerial(benchmark::State& st) {
  const auto& s = scene(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(reference::knn_graph(s.cloud, kNeighbors));
}

void BM_KnnParallel(benchmark::State& st) {
  const auto& s = scene(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(knn_graph(s.cloud, kNeighbors));
}

void BM_SimilaritySerial(benchmark::State& st) {
  const auto& s = scene(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(reference::similarity_weights(s.cloud.features(), s.graph));
}

void BM_SimilarityParallel(benchmark::State& st) {
  const auto& s = scene(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) {
    benchmark::DoNotOptimize(pairwise_similarity(s.cloud.features(), s.graph, PointwiseTransform::identity()));
  }
}

void BM_CrfStepSerial(benchmark::State& st) {
  const auto& s = scene(static_cast<std::size_t>(st.range(0)));
  const FeatureMatrix& z = s.cloud.features();
  for (auto _ : st) benchmark::DoNotOptimize(reference::crf_jacobi_step(z, z, s.sim, s.compat.realized()));
}

void BM_CrfStepParallel(benchmark::State& st) {
  const auto& s = scene(static_cast<std::size_t>(st.range(0)));
  CrfConfig cfg;
  cfg.compat = s.compat;
  cfg.record_energy = false;
  const auto state = ContinuousCrfState::start(s.cloud.features());
  for (auto _ : st) benchmark::DoNotOptimize(crf_step(state, s.sim, cfg));
}

void BM_DiffusionSerial(benchmark::State& st) {
  const auto& s = scene(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(reference::diffusion_step(s.cloud.features(), s.sim.graph(), 0.5));
}

void BM_DiffusionParallel(benchmark::State& st) {
  const auto& s = scene(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(diffusion_step(s.cloud.features(), s.sim.graph(), 0.5));
}

void BM_DiscreteSerial(benchmark::State& st) {
  const auto& s = scene(static_cast<std::size_t>(st.range(0)));
  const Matrix c = LabelCompatibility::potts_complement(3).matrix();
  const auto w = s.sim.graph().flat_weights();
  for (auto _ : st) {
    benchmark::DoNotOptimize(reference::discrete_crf_step(s.probabilities, s.probabilities, s.graph, w, c));
  }
}

void BM_DiscreteParallel(benchmark::State& st) {
  const auto& s = scene(static_cast<std::size_t>(st.range(0)));
  const auto compat = LabelCompatibility::potts_complement(3);
  const LabelField field(s.probabilities);
  const auto w = s.sim.graph().flat_weights();
  for (auto _ : st) benchmark::DoNotOptimize(discrete_crf_step(field, s.graph, w, compat));
}

// The serial kNN sorts every candidate, so it stays at small sizes.
#define CRFCONV_KNN_SIZES ->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond)->UseRealTime()
#define CRFCONV_SIZES ->Arg(1000)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond)->UseRealTime()

BENCHMARK(BM_KnnSerial) CRFCONV_KNN_SIZES;
BENCHMARK(BM_KnnParallel) CRFCONV_KNN_SIZES;
BENCHMARK(BM_SimilaritySerial) CRFCONV_SIZES;
BENCHMARK(BM_SimilarityParallel) CRFCONV_SIZES;
BENCHMARK(BM_CrfStepSerial) CRFCONV_SIZES;
BENCHMARK(BM_CrfStepParallel) CRFCONV_SIZES;
BENCHMARK(BM_DiffusionSerial) CRFCONV_SIZES;
BENCHMARK(BM_DiffusionParallel) CRFCONV_SIZES;
BENCHMARK(BM_DiscreteSerial) CRFCONV_SIZES;
BENCHMARK(BM_DiscreteParallel) CRFCONV_SIZES;

}  // namespace

BENCHMARK_MAIN();

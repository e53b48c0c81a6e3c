// Micro-benchmarks for the per-batch hot paths: weight optimization,
// k-means fitting, and metric evaluation.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rapt/clustering.hpp"
#include "rapt/decorrelation.hpp"
#include "rapt/metrics.hpp"
#include "rapt/rff.hpp"
#include "rapt/rng.hpp"

namespace {

std::vector<rapt::PooledFeature> random_pooled(int n, int c, std::uint64_t seed) {
  auto eng = rapt::make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<rapt::PooledFeature> pooled(n, rapt::PooledFeature(c));
  for (auto& row : pooled)
    for (auto& v : row) v = gauss(eng);
  return pooled;
}

rapt::ClusterAssignment round_robin_assignment(int n, int k) {
  rapt::ClusterAssignment a;
  a.labels.resize(n);
  a.counts.assign(k, 0);
  for (int i = 0; i < n; ++i) {
    a.labels[i] = i % k;
    a.counts[i % k]++;
  }
  return a;
}

void BM_DecorrLoss(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  const auto pooled = random_pooled(n, c, 7);
  const auto assignment = round_robin_assignment(n, 8);
  const auto banks = rapt::sample_rff(5, 11);
  rapt::DecorrConfig cfg;
  const auto w = rapt::SampleWeights::uniform(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rapt::decorr_loss(pooled, w, assignment, banks, cfg));
  }
}
BENCHMARK(BM_DecorrLoss)->Args({128, 16})->Args({128, 32})->Args({256, 32});

void BM_OptimizeWeights(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  const auto pooled = random_pooled(n, c, 7);
  const auto assignment = round_robin_assignment(n, 8);
  const auto banks = rapt::sample_rff(5, 11);
  rapt::DecorrConfig cfg;
  cfg.steps = static_cast<int>(state.range(2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rapt::optimize_weights(pooled, assignment, banks, cfg));
  }
}
BENCHMARK(BM_OptimizeWeights)->Args({128, 32, 5})->Args({128, 32, 20});

void BM_KMeansFit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const auto pooled = random_pooled(n, dim, 3);
  std::vector<rapt::ClusterDescriptor> descriptors(pooled.begin(), pooled.end());
  for (auto _ : state) {
    benchmark::DoNotOptimize(rapt::kmeans_fit(descriptors, 8, 50, 5));
  }
}
BENCHMARK(BM_KMeansFit)->Args({128, 85})->Args({256, 85});

void BM_LogAvgMissRate(benchmark::State& state) {
  const int n_images = static_cast<int>(state.range(0));
  auto eng = rapt::make_engine(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<rapt::GroundTruthBox> gts;
  std::vector<rapt::Detection> dets;
  for (int img = 0; img < n_images; ++img) {
    for (int g = 0; g < 4; ++g) {
      const double x = 500.0 * u(eng), y = 300.0 * u(eng);
      rapt::GroundTruthBox gt;
      gt.image_id = img;
      gt.box = {x, y, x + 40.0, y + 100.0};
      gt.height = 100.0;
      gt.visibility = 0.9;
      gts.push_back(gt);
      rapt::Detection d;
      d.image_id = img;
      d.box = {x + 4.0 * u(eng), y + 4.0 * u(eng), x + 40.0, y + 100.0};
      d.score = u(eng);
      dets.push_back(d);
    }
  }
  const auto split = rapt::split_reasonable();
  for (auto _ : state) {
    benchmark::DoNotOptimize(rapt::log_avg_miss_rate(dets, gts, n_images, split));
  }
}
BENCHMARK(BM_LogAvgMissRate)->Arg(100)->Arg(500);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}

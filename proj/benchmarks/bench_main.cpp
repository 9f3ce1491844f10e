#include <benchmark/benchmark.h>

#include <random>

#include "repgeom/encoding.hpp"
#include "repgeom/intrinsic_dim.hpp"
#include "repgeom/neighbors.hpp"
#include "repgeom/similarity.hpp"
#include "repgeom/synth.hpp"

using namespace repgeom;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

}  // namespace

static void bench_knn_exact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix x = synth_manifold({ManifoldKind::Hypercube, 8, 64, n, 0.0, 1});
  for (auto _ : state) benchmark::DoNotOptimize(knn_exact(x, 64));
  state.SetComplexityN(state.range(0));
}

static void bench_scale_sweep(benchmark::State& state) {
  const Matrix x = synth_manifold({ManifoldKind::Hypercube, 5, 50, 4000, 0.0, 2});
  const NeighborTable table = knn_exact(x, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(scale_sweep(table));
}

static void bench_linear_cka(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix a = Matrix::from_eigen(gaussian(n, 256, 3));
  const Matrix b = Matrix::from_eigen(gaussian(n, 256, 4));
  for (auto _ : state) benchmark::DoNotOptimize(linear_cka(a, b));
}

static void bench_ridge_cv(benchmark::State& state) {
  const auto voxels = state.range(0);
  const Eigen::MatrixXd x = gaussian(600, 64, 5);
  const Eigen::MatrixXd y = x * gaussian(64, voxels, 6) + gaussian(600, voxels, 7);
  for (auto _ : state) benchmark::DoNotOptimize(ridge_fit_cv(x, y));
}

BENCHMARK(bench_knn_exact)->RangeMultiplier(2)->Range(500, 4000)->Unit(benchmark::kMillisecond)->Complexity();
BENCHMARK(bench_scale_sweep)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(bench_linear_cka)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(bench_ridge_cv)->Arg(10)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

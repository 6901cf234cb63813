#include <benchmark/benchmark.h>

#include <bagp/fit.hpp>
#include <bagp/log.hpp>
#include <bagp/maxmod.hpp>
#include <bagp/metrics.hpp>
#include <bagp/mle.hpp>
#include <bagp/sampler.hpp>

namespace {

using namespace bagp;

// Paired blocks with uniform knots, trained on a random LHD of the block-arctan target.
struct Setup {
  BasisStructure basis;
  Dataset data;

  Setup(std::size_t D, std::size_t knots, std::size_t n) : basis(make_basis(D, knots)), data(make_data(D, n)) {}

  static BasisStructure make_basis(std::size_t D, std::size_t knots) {
    std::vector<Subpartition::Block> blocks;
    for (std::size_t j = 0; j + 1 < D; j += 2) blocks.push_back({j, j + 1});
    return BasisStructure(Subpartition(D, blocks), std::vector<Subdivision>(D, Subdivision::uniform(knots)));
  }

  static Dataset make_data(std::size_t D, std::size_t n) {
    const Design d = lhd(n, D, 17, DesignKind::random_lhd);
    Vector y(d.points.rows());
    std::vector<double> row(D);
    for (Eigen::Index i = 0; i < d.points.rows(); ++i) {
      for (std::size_t c = 0; c < D; ++c) row[c] = d.points(i, static_cast<Eigen::Index>(c));
      y[i] = toy_block_arctan(D, row);
    }
    return Dataset(d.points, y);
  }
};

void BM_DesignMatrix(benchmark::State& state) {
  const Setup s(static_cast<std::size_t>(state.range(0)), 6, 1000);
  for (auto _ : state) benchmark::DoNotOptimize(s.basis.design_matrix(s.data.X()));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_DesignMatrix)->Arg(4)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Condition(benchmark::State& state) {
  const auto D = static_cast<std::size_t>(state.range(0));
  const Setup s(D, 6, 3 * D);
  const PriorCov prior(s.basis, KernelParams::uniform(s.basis, 1.0, 0.5, 1e-4));
  const MeanPath path = state.range(1) ? MeanPath::woodbury : MeanPath::direct;
  for (auto _ : state) benchmark::DoNotOptimize(condition(s.basis, prior, s.data, 1e-4, path).mu);
}
BENCHMARK(BM_Condition)->Args({10, 0})->Args({10, 1})->Args({20, 0})->Args({20, 1})->Unit(benchmark::kMillisecond);

void BM_NllGradient(benchmark::State& state) {
  const auto D = static_cast<std::size_t>(state.range(0));
  const Setup s(D, 6, 3 * D);
  const MleProblem problem(s.basis, s.data);
  const Vector p = problem.pack(KernelParams::uniform(s.basis, 1.0, 0.5, 1e-3));
  Vector g;
  for (auto _ : state) benchmark::DoNotOptimize(problem.evaluate(p, &g));
}
BENCHMARK(BM_NllGradient)->Arg(10)->Arg(20)->Unit(benchmark::kMicrosecond);

void BM_FitFixedParams(benchmark::State& state) {
  const auto D = static_cast<std::size_t>(state.range(0));
  const Setup s(D, 6, 3 * D);
  FitOptions opts;
  opts.estimate_params = false;
  opts.params = KernelParams::uniform(s.basis, 1.0, 0.5, 1e-4);
  for (auto _ : state) benchmark::DoNotOptimize(fit_model(s.basis, s.data, default_directions(D), opts).xi);
}
BENCHMARK(BM_FitFixedParams)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_FitWithMle(benchmark::State& state) {
  log::set_level(log::Level::error);
  const Setup s(10, 6, 30);
  for (auto _ : state) benchmark::DoNotOptimize(fit_model(s.basis, s.data, default_directions(10)).xi);
}
BENCHMARK(BM_FitWithMle)->Unit(benchmark::kMillisecond);

void BM_SampleHmc(benchmark::State& state) {
  const Setup s(4, 6, 20);
  FitOptions opts;
  opts.estimate_params = false;
  opts.params = KernelParams::uniform(s.basis, 1.0, 0.5, 1e-4);
  const FittedModel m = fit_model(s.basis, s.data, default_directions(4), opts);
  const PriorCov prior(s.basis, m.params);
  const Posterior post = condition(s.basis, prior, s.data, m.params.tau2);
  const auto draws = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_truncated(post, m.constraints, m.xi, draws, 1).draws);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleHmc)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_MaxModToy(benchmark::State& state) {
  log::set_level(log::Level::error);
  const Design d = lhd(42, 6, 5, DesignKind::maximin_lhd);
  Vector y(d.points.rows());
  std::vector<double> row(6);
  for (Eigen::Index i = 0; i < d.points.rows(); ++i) {
    for (std::size_t c = 0; c < 6; ++c) row[c] = d.points(i, static_cast<Eigen::Index>(c));
    y[i] = toy_6d(row);
  }
  const Dataset data(d.points, y);
  MaxModConfig cfg;
  cfg.max_iterations = static_cast<std::size_t>(state.range(0));
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_maxmod(data, cfg).model.xi);
}
BENCHMARK(BM_MaxModToy)->Arg(6)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

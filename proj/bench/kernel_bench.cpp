// Serial reference vs chunked OpenMP kernels, plus one imputation run.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <map>
#include <random>

#include "recontact/glm.hpp"
#include "recontact/kernels.hpp"
#include "recontact/mi.hpp"
#include "recontact/synth.hpp"

namespace {

using namespace recontact::glm;

struct Data {
  MatrixXd Xc;
  MatrixXd Xz;
  VectorXd y;
  VectorXd yb;
  VectorXd params;
  VectorXd beta;
};

const Data& data(Index n) {
  static std::map<Index, Data> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.3);
  std::poisson_distribution<int> pois(1.5);
  Data d;
  d.Xc = MatrixXd(n, 10);
  d.Xz = MatrixXd(n, 4);
  d.y = VectorXd(n);
  d.yb = VectorXd(n);
  for (Index i = 0; i < n; ++i) {
    d.Xc(i, 0) = 1.0;
    for (Index j = 1; j < 10; ++j) d.Xc(i, j) = 0.3 * z(rng);
    d.Xz.row(i) = d.Xc.row(i).head(4);
    d.y(i) = coin(rng) ? 0.0 : pois(rng);
    d.yb(i) = coin(rng);
  }
  d.params = VectorXd::Constant(15, 0.05);
  d.beta = VectorXd::Constant(10, 0.05);
  return cache.emplace(n, std::move(d)).first->second;
}

void BM_ZinbReference(benchmark::State& state) {
  const auto& d = data(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(reference::zinb(d.Xc, d.Xz, d.y, d.params, Need::Hessian));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ZinbSerial(benchmark::State& state) {
  const auto& d = data(state.range(0));
  const ZinbKernel k(d.Xc, d.Xz, d.y);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_serial(k, d.params, Need::Hessian));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ZinbOpenMP(benchmark::State& state) {
  const auto& d = data(state.range(0));
  const ZinbKernel k(d.Xc, d.Xz, d.y);
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(k, d.params, Need::Hessian));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LogisticReference(benchmark::State& state) {
  const auto& d = data(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(reference::logistic(d.Xc, d.yb, d.beta, Need::Hessian));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LogisticOpenMP(benchmark::State& state) {
  const auto& d = data(state.range(0));
  const LogisticKernel k(d.Xc, d.yb);
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(k, d.beta, Need::Hessian));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Impute(benchmark::State& state) {
  using namespace recontact;
  static const auto cohort = synth::generate_cohort(synth::make_assumption3_config(), 1);
  auto spec = mi::ImputationModelSpec::standard();
  spec.m = 4;
  spec.cycles = 5;
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mi::fcs_impute(cohort, spec, mi::Strategy::MiMnar, 1));
}

const int kMaxThreads = omp_get_num_procs();

void thread_args(benchmark::internal::Benchmark* b) {
  for (Index n : {10000, 100000})
    for (int t = 1; t <= kMaxThreads; t *= 2) b->Args({n, t});
}

}  // namespace

BENCHMARK(BM_ZinbReference)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ZinbSerial)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ZinbOpenMP)->Apply(thread_args)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LogisticReference)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LogisticOpenMP)->Apply(thread_args)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Impute)->DenseRange(1, kMaxThreads, 1)->Unit(benchmark::kMillisecond)->UseRealTime()->Iterations(1);

BENCHMARK_MAIN();

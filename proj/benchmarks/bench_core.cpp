#include <benchmark/benchmark.h>

#include "mflqr/example_problem.hpp"
#include "mflqr/model_free.hpp"

namespace mflqr {
namespace {

const MfSystem& sys() {
  static const MfSystem s = example::system();
  return s;
}

const WeightSpec& weights() {
  static const WeightSpec w = example::weights();
  return w;
}

void BM_GleDual2n(benchmark::State& state) {
  const OperatorTriple t = make_triple(closed_loop_2n(sys(), example::initial_gains()));
  const MatrixXd Q = closed_loop_weight(weights(), example::initial_gains());
  for (auto _ : state) benchmark::DoNotOptimize(solve_gle_dual(t, Q));
}
BENCHMARK(BM_GleDual2n);

void BM_GleDualAugmented(benchmark::State& state) {
  const OperatorTriple t = augmented_triple(sys(), example::initial_gains());
  const MatrixXd Q = weights().Lambda_tilde();
  for (auto _ : state) benchmark::DoNotOptimize(solve_gle_dual(t, Q));
}
BENCHMARK(BM_GleDualAugmented);

void BM_PolicyEvaluation(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(policy_evaluation(sys(), weights(), example::initial_gains()));
  }
}
BENCHMARK(BM_PolicyEvaluation);

void BM_RunPi(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_pi(sys(), weights(), example::initial_gains()));
  }
}
BENCHMARK(BM_RunPi)->Unit(benchmark::kMillisecond);

void BM_RunPd(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_pd(sys(), weights(), example::initial_gains()));
  }
}
BENCHMARK(BM_RunPd)->Unit(benchmark::kMillisecond);

void BM_Rollout(benchmark::State& state) {
  const InitialStateEnsemble ens = example::initial_states().with_uniform_inputs(2, 5.0, 7);
  RolloutOptions opts;
  opts.horizon = 100;
  opts.rollouts = static_cast<int>(state.range(0));
  opts.free_initial_input = true;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rollout(sys(), example::initial_gains(), ens, opts));
  }
}
BENCHMARK(BM_Rollout)->Arg(30)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_DataDualUpdate(benchmark::State& state) {
  const InitialStateEnsemble ens = example::initial_states().with_uniform_inputs(2, 5.0, 7);
  const DataMatrices d = exact_moments(sys(), example::initial_gains(), ens, 100).data;
  const PartialModel pm = PartialModel::from_system(sys(), weights());
  for (auto _ : state) {
    benchmark::DoNotOptimize(data_dual_update(pm, example::initial_gains(), d));
  }
}
BENCHMARK(BM_DataDualUpdate);

}  // namespace
}  // namespace mflqr

BENCHMARK_MAIN();

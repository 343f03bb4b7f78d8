#include <random>

#include <benchmark/benchmark.h>

#include "gpcn/diagnostics.hpp"
#include "gpcn/elliptic.hpp"
#include "gpcn/metropolis.hpp"

using namespace gpcn;

namespace {

Matrix gamma_at_map(const elliptic::ForwardModel& model, const elliptic::Observation& obs) {
  const auto map = elliptic::map_estimate(obs, model, PriorSpec::inverse_square(model.n_modes()));
  return elliptic::build_gamma_from_map(map.xi, obs, model);
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const elliptic::ForwardModel model(state.range(0));
  Rng rng(1);
  const Vector xi = PriorSpec::inverse_square(state.range(0)).sample(rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(xi));
}
BENCHMARK(BM_Forward)->Arg(50)->Arg(200)->Arg(800);

static void BM_Jacobian(benchmark::State& state) {
  const elliptic::ForwardModel model(state.range(0));
  Rng rng(2);
  const Vector xi = PriorSpec::inverse_square(state.range(0)).sample(rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.jacobian(xi));
}
BENCHMARK(BM_Jacobian)->Arg(50)->Arg(200);

static void BM_OperatorPack(benchmark::State& state) {
  const auto n = state.range(0);
  const elliptic::ForwardModel model(n);
  const auto obs = elliptic::generate_data(elliptic::TruthSpec::sine(), 0.1, model, 3);
  const Matrix gamma = gamma_at_map(model, obs);
  const auto prior = PriorSpec::inverse_square(n);
  for (auto _ : state) benchmark::DoNotOptimize(build_operator_pack(prior, gamma, 0.5));
}
BENCHMARK(BM_OperatorPack)->Arg(50)->Arg(200)->Arg(400);

static void BM_MhStepGpcn(benchmark::State& state) {
  const auto n = state.range(0);
  const elliptic::ForwardModel model(n);
  const auto obs = elliptic::generate_data(elliptic::TruthSpec::sine(), 0.1, model, 4);
  const auto prior = PriorSpec::inverse_square(n);
  const Posterior post{prior, [&](const Vector& xi) { return elliptic::phi(xi, obs, model); }};
  const auto kernel = ProposalKernel::gpcn(prior, gamma_at_map(model, obs), 0.5);
  Rng rng(5);
  ChainState st{Vector::Zero(n), post.phi(Vector::Zero(n))};
  for (auto _ : state) {
    st = mh_step(kernel, post, st, rng).state;
    benchmark::DoNotOptimize(st.phi);
  }
}
BENCHMARK(BM_MhStepGpcn)->Arg(50)->Arg(200)->Arg(400);

static void BM_EssIms(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  x[0] = z(rng);
  for (std::size_t i = 1; i < x.size(); ++i) x[i] = 0.9 * x[i - 1] + z(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ess_ims(x).ess);
}
BENCHMARK(BM_EssIms)->Arg(10000)->Arg(100000)->Arg(1000000);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <vector>

#include "ohtes/envs.hpp"
#include "ohtes/net.hpp"
#include "ohtes/replay.hpp"
#include "ohtes/rollout.hpp"
#include "ohtes/td3.hpp"

namespace {

using namespace ohtes;

void BM_MlpForwardBackward(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const auto mlp = net::mlp_init<float>({4, hidden, hidden, 1}, net::OutputActivation::kIdentity, 1.0f, 1);
  Rng rng(2);
  net::MatrixF x(100, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(rng.normal());
  const net::MatrixF upstream = net::MatrixF::Constant(100, 1, 0.01f);
  for (auto _ : state) {
    net::ForwardCache<float> cache;
    net::mlp_forward(mlp, x, &cache);
    auto grads = net::mlp_backward(mlp, cache, upstream);
    benchmark::DoNotOptimize(grads.weights[0].data());
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(300);

struct Filled {
  std::unique_ptr<envs::Env> env = envs::make_env("pendulum");
  replay::ReplayBuffer buffer{100000, 3, 1};
  Filled() {
    Workspace ws(buffer, *env, 7);
    Rng rng(3);
    for (int e = 0; e < 100; ++e) ws.collect(nullptr, 0.0, rng);
  }
};

void BM_SampleNStep(benchmark::State& state) {
  static Filled filled;
  Rng rng(4);
  for (auto _ : state) {
    auto batch = filled.buffer.sample_nstep(100, static_cast<int>(state.range(0)), 0.99, rng);
    benchmark::DoNotOptimize(batch.ret_n.data());
  }
}
BENCHMARK(BM_SampleNStep)->Arg(1)->Arg(5);

void BM_Td3GradStep(benchmark::State& state) {
  static Filled filled;
  const std::vector<int> hidden(2, static_cast<int>(state.range(0)));
  auto agent = td3::make_agent(filled.env->spec(), hidden, 5);
  td3::Td3Hyper h;
  h.grad_steps_per_round = 1;
  Rng rng(6);
  for (auto _ : state) td3::td3_update_round(agent, filled.buffer, h, rng);
}
BENCHMARK(BM_Td3GradStep)->Arg(64)->Arg(300);

}  // namespace
BENCHMARK_MAIN();

// Serial reference kernels against the OpenMP kernels, and the host forward
// pass with and without an SR block. Thread count comes from SRKIT_THREADS.

#include <benchmark/benchmark.h>

#include "srkit/commands.hpp"
#include "srkit/host_net.hpp"
#include "srkit/kernels.hpp"
#include "srkit/reference.hpp"

using namespace srkit;

namespace {

Tensor random(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (float& v : t.data()) v = rng.symmetric(1.0f);
  return t;
}

// Stage 2 of the default host: 16 -> 32 channels, 32x32 input, stride 2.
const Shape kIn{32, 16, 32, 32};
const Shape kW{32, 16, 3, 3};

void BM_Conv3x3Fwd_Reference(benchmark::State& st) {
  const Tensor x = random(kIn, 1), w = random(kW, 2);
  for (auto _ : st) benchmark::DoNotOptimize(reference::conv3x3_fwd(x, w, 2));
}

void BM_Conv3x3Fwd_OpenMP(benchmark::State& st) {
  const Tensor x = random(kIn, 1), w = random(kW, 2);
  for (auto _ : st) benchmark::DoNotOptimize(ops::conv3x3_fwd(x, w, 2));
}

void BM_Conv3x3Bwd_Reference(benchmark::State& st) {
  const Tensor x = random(kIn, 1), w = random(kW, 2);
  const Tensor g = random(Shape{32, 32, 16, 16}, 3);
  for (auto _ : st) {
    benchmark::DoNotOptimize(reference::conv3x3_bwd_input(kIn, w, g, 2));
    benchmark::DoNotOptimize(reference::conv3x3_bwd_weight(x, kW, g, 2));
  }
}

void BM_Conv3x3Bwd_OpenMP(benchmark::State& st) {
  const Tensor x = random(kIn, 1), w = random(kW, 2);
  const Tensor g = random(Shape{32, 32, 16, 16}, 3);
  for (auto _ : st) benchmark::DoNotOptimize(ops::conv3x3_bwd(x, w, g, 2));
}

void BM_Linear_Reference(benchmark::State& st) {
  const Tensor x = random(Shape{64, 4096, 1, 1}, 4), w = random(Shape{512, 4096, 1, 1}, 5);
  for (auto _ : st) benchmark::DoNotOptimize(reference::linear_fwd(x, w));
}

void BM_Linear_OpenMP(benchmark::State& st) {
  const Tensor x = random(Shape{64, 4096, 1, 1}, 4), w = random(Shape{512, 4096, 1, 1}, 5);
  for (auto _ : st) benchmark::DoNotOptimize(ops::linear_fwd(x, w));
}

void BM_HostForward(benchmark::State& st) {
  HostConfig cfg;
  if (st.range(0) > 0) cfg.sr_insert = static_cast<int>(st.range(0));
  Rng rng(6);
  const HostParams p = host_init(cfg, rng);
  const Tensor x = random(Shape{64, 3, 32, 32}, 7);
  for (auto _ : st) benchmark::DoNotOptimize(host_forward(cfg, p, x, Mode::eval, rng));
}

}  // namespace

BENCHMARK(BM_Conv3x3Fwd_Reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3Fwd_OpenMP)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3Bwd_Reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3Bwd_OpenMP)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Linear_Reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Linear_OpenMP)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HostForward)->Arg(0)->Arg(3)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  ops::set_threads(threads_from_env());
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}

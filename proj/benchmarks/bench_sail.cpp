#include <benchmark/benchmark.h>

#include <random>

#include "sail/arch.hpp"
#include "sail/bitplane.hpp"
#include "sail/lutgemv.hpp"
#include "sail/pipeline.hpp"
#include "sail/sailt.hpp"
#include "sail/typeconv.hpp"

using namespace sail;

namespace {

GemvJob make_job(std::size_t batch, std::size_t k, std::size_t n, unsigned wb, unsigned nbw) {
  std::mt19937 rng(1);
  GemvJob j;
  j.batch = batch, j.k = k, j.n = n, j.weight_bits = wb, j.nbw = nbw;
  std::uniform_int_distribution<int> w(-(1 << (wb - 1)), (1 << (wb - 1)) - 1), x(0, 255);
  for (std::size_t i = 0; i < k * n; ++i) j.weights.push_back(static_cast<std::int8_t>(w(rng)));
  for (std::size_t i = 0; i < batch * k; ++i) j.activations.push_back(static_cast<std::uint8_t>(x(rng)));
  return j;
}

}  // namespace

// --- kernels ------------------------------------------------------------------

static void BM_gemv_tile(benchmark::State& state) {
  const auto job = make_job(static_cast<std::size_t>(state.range(0)), 1024, 1024, 4,
                            static_cast<unsigned>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(gemv_tile(job));
}
BENCHMARK(BM_gemv_tile)->Args({1, 2})->Args({8, 2})->Args({8, 4})->Unit(benchmark::kMillisecond);

static void BM_int_to_float_inmem(benchmark::State& state) {
  const unsigned n = static_cast<unsigned>(state.range(0));
  BitPlaneArray a;
  std::mt19937 rng(2);
  for (std::size_t c = 0; c < a.cols(); ++c) a.poke_column(c, 0, n, rng() & ((1u << n) - 1));
  for (auto _ : state) benchmark::DoNotOptimize(int_to_float_inmem(a, 0, n, 32));
}
BENCHMARK(BM_int_to_float_inmem)->Arg(8)->Arg(16)->Arg(25);

static void BM_bitserial_add(benchmark::State& state) {
  const unsigned n = static_cast<unsigned>(state.range(0));
  BitPlaneArray a;
  for (auto _ : state) a.bitserial_add(0, 32, 64, n);
}
BENCHMARK(BM_bitserial_add)->Arg(8)->Arg(32);

static void BM_bitserial_mult(benchmark::State& state) {
  const unsigned n = static_cast<unsigned>(state.range(0));
  BitPlaneArray a;
  for (auto _ : state) a.bitserial_mult(0, 32, 64, n);
}
BENCHMARK(BM_bitserial_mult)->Arg(8)->Arg(16);

// --- instruction and model ------------------------------------------------------

static void BM_execute_instruction(benchmark::State& state) {
  const std::size_t B = static_cast<std::size_t>(state.range(0));
  std::mt19937 rng(3);
  std::normal_distribution<float> d;
  std::vector<float> w(1024 * 1024), x(B * 1024);
  for (auto& v : w) v = d(rng);
  for (auto& v : x) v = d(rng);
  MachineState st;
  st.memory.map(0x100000, encode_sailt(quantize(w, 1024, 1024, 4, 1024)));
  st.memory.map(0x800000, encode_sailt(quantize(x, B, 1024, 8, 1024, TensorKind::Activation)));
  st.memory.map_zero(0xC00000, B * 1024 * 4);
  st.regs[1] = 0x100000, st.regs[2] = 0x800000, st.regs[3] = 0xC00000;
  const LutmmInstruction in{0, 0, 1, 2, 4, 3};
  for (auto _ : state) {
    CSramCluster cluster;
    benchmark::DoNotOptimize(execute_instruction(cluster, in, st));
  }
}
BENCHMARK(BM_execute_instruction)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_cycles_per_token(benchmark::State& state) {
  const auto m = *model_preset("llama2-70b");
  PipelineConfig c;
  c.batch = 8;
  for (auto _ : state) benchmark::DoNotOptimize(cycles_per_token(m, c));
}
BENCHMARK(BM_cycles_per_token);
BENCHMARK_MAIN();

// Serial reference kernels against the OpenMP versions, plus one training
// batch at different thread counts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gcnbert/kernels.hpp"
#include "gcnbert/synth.hpp"
#include "gcnbert/trainer.hpp"

using namespace gcnbert;

namespace {

std::vector<Real> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Real> v(n);
    for (Real& x : v) x = static_cast<Real>(u(rng));
    return v;
}

template <bool Reference>
void BM_Gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto mode = static_cast<kernels::Transpose>(state.range(1));
    const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
    std::vector<Real> c(n * n);
    const kernels::GemmDims dims{n, n, n};
    if (!Reference) kernels::set_threads(static_cast<int>(state.range(2)));
    for (auto _ : state) {
        if (Reference) {
            kernels::gemm_reference(a, b, c, dims, mode, false);
        } else {
            kernels::gemm(a, b, c, dims, mode, false);
        }
        benchmark::DoNotOptimize(c.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

void gemm_reference_args(benchmark::internal::Benchmark* b) {
    for (int n : {64, 128, 256})
        for (int mode : {0, 1, 2}) b->Args({n, mode});
}

void gemm_parallel_args(benchmark::internal::Benchmark* b) {
    for (int n : {64, 128, 256})
        for (int mode : {0, 1, 2})
            for (int threads : {1, 2, 4}) b->Args({n, mode, threads});
}

void BM_BatchGradients(benchmark::State& state) {
    kernels::set_threads(static_cast<int>(state.range(0)));
    ModelConfig config;
    config.classes = 10;
    config.gcn.width = 8;
    config.bert.heads = 2;
    config.bert.head_dim = 16;
    config.bert.ffn_dim = 64;
    const GcnBertModel model(config, 0);
    SynthSpec spec;
    std::vector<Tensor> poses;
    std::vector<std::size_t> targets;
    Rng rng(0);
    for (std::size_t i = 0; i < 16; ++i) {
        const auto frames = normalized_clip(synth_clip(spec, i % 10, i), spec.frame_width, spec.frame_height);
        poses.push_back(sample_window(frames, SampleMode::Train, config.window, rng));
        targets.push_back(i % 10);
    }
    for (auto _ : state) benchmark::DoNotOptimize(batch_gradients(model, poses, targets).loss_sum);
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * poses.size()));
}

}  // namespace

BENCHMARK(BM_Gemm<true>)->Name("gemm_reference")->Apply(gemm_reference_args)->ArgNames({"n", "transpose"});
BENCHMARK(BM_Gemm<false>)->Name("gemm_openmp")->Apply(gemm_parallel_args)->ArgNames({"n", "transpose", "threads"});
BENCHMARK(BM_BatchGradients)->Arg(1)->Arg(2)->Arg(4)->ArgNames({"threads"})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

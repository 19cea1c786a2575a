// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to the
// number of cores to see the parallel speed-up; both paths give identical
// results.

#include <benchmark/benchmark.h>

#include "gtdl/extract.hpp"
#include "gtdl/model.hpp"
#include "gtdl/rng.hpp"

using namespace gtdl;

namespace {

struct Fixture {
    Model model;
    Matrix x;
    Vector y;

    explicit Fixture(std::size_t rows)
        : model(config(), 9, AttentionMask::full(10)), x(static_cast<long>(rows), 9), y(static_cast<long>(rows)) {
        SeededRng rng(1);
        for (long i = 0; i < x.rows(); ++i) {
            for (long j = 0; j < 9; ++j) x(i, j) = rng.normal();
            y(i) = rng.normal();
        }
    }

    static ModelConfig config() {
        ModelConfig cfg;
        cfg.seed = 7;
        return cfg;
    }
};

void loss_and_gradient(benchmark::State& state, Exec exec) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    std::vector<double> grad(f.model.parameters().size());
    for (auto _ : state) benchmark::DoNotOptimize(f.model.loss_and_gradient(f.x, f.y, grad, exec));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void predict(benchmark::State& state, Exec exec) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(f.model.predict(f.x, exec));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void average(benchmark::State& state, Exec exec) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    const auto rec = f.model.record_attention(f.x, Exec::Serial);
    for (auto _ : state) benchmark::DoNotOptimize(average_attention(rec, exec));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(loss_and_gradient, serial, Exec::Serial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(loss_and_gradient, parallel, Exec::Parallel)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(predict, serial, Exec::Serial)->Arg(2500)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(predict, parallel, Exec::Parallel)->Arg(2500)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(average, serial, Exec::Serial)->Arg(2500)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(average, parallel, Exec::Parallel)->Arg(2500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "sar/anchors.hpp"
#include "sar/datagen.hpp"
#include "sar/ops.hpp"
#include "sar/rng.hpp"
#include "sar/train.hpp"

using namespace sar;

namespace {

Tensor2D random_tensor(std::size_t rows, std::size_t cols, Rng& rng, bool requires_grad) {
    Tensor2D t(rows, cols, requires_grad);
    for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_ForwardBackward(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    Tensor2D x = random_tensor(n, 16, rng, false);
    Tensor2D w1 = random_tensor(16, 64, rng, true);
    Tensor2D b1 = random_tensor(1, 64, rng, true);
    Tensor2D w2 = random_tensor(64, 10, rng, true);
    Tensor2D b2 = random_tensor(1, 10, rng, true);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 10);

    for (auto _ : state) {
        w1.zero_grad();
        b1.zero_grad();
        w2.zero_grad();
        b2.zero_grad();
        Tape tape;
        Tensor2D h = relu(tape, affine(tape, x, w1, b1));
        auto res = softmax_ce(tape, affine(tape, h, w2, b2), labels);
        tape.backward(res.loss);
        benchmark::DoNotOptimize(w1.grad().data());
    }
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(256);

void BM_AnchorGeneration(benchmark::State& state) {
    const std::size_t c = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto set = generate_anchors(AnchorSource::MES, c, 2 * c, 7);
        benchmark::DoNotOptimize(set.A.values().data());
    }
}
BENCHMARK(BM_AnchorGeneration)->Arg(10)->Arg(50)->Arg(100);

void BM_TrainStep(benchmark::State& state) {
    const bool with_sar = state.range(0) != 0;
    GmmSpec spec;
    spec.classes = 10;
    spec.n_max = 64;
    spec.beta = 1.0;
    auto ds = sample_gmm(spec);

    TrainConfig cfg;
    cfg.mode = with_sar ? Mode::Sar : Mode::Ce;
    cfg.epochs = 1;
    cfg.batch_size = 64;
    cfg.log_anchor_matrices = false;
    if (with_sar) cfg.anchors = generate_anchors(AnchorSource::ND, 10, 16, 3);

    for (auto _ : state) {
        auto result = train(cfg, ds, ds);
        benchmark::DoNotOptimize(result.records.data());
    }
    state.SetLabel(with_sar ? "sar" : "ce");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();

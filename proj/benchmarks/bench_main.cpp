#include <benchmark/benchmark.h>

#include <vector>

#include "npe/matrix.hpp"
#include "npe/model.hpp"
#include "npe/numerics.hpp"
#include "npe/rng.hpp"
#include "npe/theory.hpp"

namespace {

npe::Matrix random_matrix(std::size_t r, std::size_t c, npe::Rng& rng) {
    npe::Matrix m(r, c);
    for (double& x : m.v) x = rng.normal();
    return m;
}

void bm_matmul_nt(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    npe::Rng rng(1);
    const npe::Matrix a = random_matrix(n, n, rng);
    const npe::Matrix b = random_matrix(n, n, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(npe::matmul_nt(a, b));
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * n * n * n);
}
BENCHMARK(bm_matmul_nt)->Arg(64)->Arg(128)->Arg(256);

void bm_lambert_w(benchmark::State& state) {
    std::vector<double> zs;
    for (int i = 0; i < 1000; ++i) zs.push_back(0.01 + 1000.0 * i);
    for (auto _ : state) {
        double acc = 0.0;
        for (const double z : zs) acc += npe::lambert_w(z);
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 1000);
}
BENCHMARK(bm_lambert_w);

void bm_numeric_minimize(benchmark::State& state) {
    for (auto _ : state) {
        double acc = 0.0;
        for (int i = 1; i <= 100; ++i) {
            acc += npe::numeric_minimize({static_cast<double>(i) * 37.0, 1.0});
        }
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 100);
}
BENCHMARK(bm_numeric_minimize);

void bm_joint_loss_step(benchmark::State& state) {
    const int n_pem = static_cast<int>(state.range(0));
    npe::Rng rng(2);
    npe::NpeModel model = npe::make_model({32, 64, 64, 16}, 10, n_pem, 1, 0.001, rng);
    const npe::Matrix x = random_matrix(64, 32, rng);
    std::vector<int> labels(64);
    for (auto& y : labels) y = static_cast<int>(rng.below(10));
    npe::ModelGrads grads;
    for (auto _ : state) {
        benchmark::DoNotOptimize(npe::total_loss(model, x, labels, &grads));
    }
}
BENCHMARK(bm_joint_loss_step)->Arg(0)->Arg(1)->Arg(16);

void bm_inference(benchmark::State& state) {
    const bool folded = state.range(0) != 0;
    npe::Rng rng(3);
    npe::NpeModel model = npe::make_model({32, 64, 64, 16}, 10, 16, 1, 0.001, rng);
    const npe::Matrix x = random_matrix(256, 32, rng);
    const npe::ClassifierHead head = npe::fold_linear(model.head, model.pems, 1.0);
    for (auto _ : state) {
        const npe::Matrix h = npe::forward_features(model, x);
        if (folded) {
            benchmark::DoNotOptimize(npe::classifier_logits(head, h));
        } else {
            benchmark::DoNotOptimize(npe::adjust_logits(npe::classifier_logits(model.head, h),
                                                        npe::npe_estimate(model.pems, h), 1.0));
        }
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 256);
}
BENCHMARK(bm_inference)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();

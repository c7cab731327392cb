#include "seal/corpus.hpp"
#include "seal/kernels.hpp"
#include "seal/model.hpp"
#include "seal/random.hpp"
#include "seal/train.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace seal;

namespace {

std::vector<float> random_floats(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto & x : v) x = static_cast<float>(rng.normal());
    return v;
}

// rows x 64 -> rows x 128, the tiny model's feed-forward shape
template <bool Parallel>
void BM_Linear(benchmark::State & state) {
    const size_t n = static_cast<size_t>(state.range(0)), in = 64, out = 128;
    const auto x = random_floats(n * in, 1), w = random_floats(out * in, 2), b = random_floats(out, 3);
    std::vector<float> y(n * out);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::parallel::linear(x.data(), w.data(), b.data(), y.data(), n, in, out);
        } else {
            kernels::serial::linear(x.data(), w.data(), b.data(), y.data(), n, in, out);
        }
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n * in * out));
}

template <bool Parallel>
void BM_LinearBackwardWeights(benchmark::State & state) {
    const size_t n = static_cast<size_t>(state.range(0)), in = 64, out = 128;
    const auto dy = random_floats(n * out, 4), x = random_floats(n * in, 5);
    std::vector<float> dw(out * in), db(out);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::parallel::linear_backward_weights(dy.data(), x.data(), dw.data(), db.data(), n, in, out);
        } else {
            kernels::serial::linear_backward_weights(dy.data(), x.data(), dw.data(), db.data(), n, in, out);
        }
        benchmark::DoNotOptimize(dw.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n * in * out));
}

template <bool Parallel>
void BM_PairwiseDistances(benchmark::State & state) {
    const size_t n = static_cast<size_t>(state.range(0)), dim = 64;
    const auto x = random_floats(n * dim, 6);
    std::vector<float> d(n * n);
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::parallel::pairwise_sq_distances(x.data(), d.data(), n, dim);
        } else {
            kernels::serial::pairwise_sq_distances(x.data(), d.data(), n, dim);
        }
        benchmark::DoNotOptimize(d.data());
    }
}

template <bool Parallel>
void BM_BatchGradient(benchmark::State & state) {
    tiny::TinyConfig cfg;
    cfg.vocab_size = WordTokenizer().vocab_size();
    const tiny::TinyModel model(cfg, tiny::init_params(cfg, 1), 1, "bench");
    CorpusConfig cc;
    cc.n_samples = static_cast<size_t>(state.range(0));
    std::vector<tiny::EncodedSample> batch;
    for (const auto & s : gen_corpus(cc)) batch.push_back(tiny::encode_sample(model.tokenizer(), s));
    for (auto _ : state) {
        auto g = Parallel ? tiny::parallel::batch_gradient(cfg, model.layout(), model.params(), batch)
                          : tiny::serial::batch_gradient(cfg, model.layout(), model.params(), batch);
        benchmark::DoNotOptimize(g.grad.data());
    }
}

} // namespace

BENCHMARK(BM_Linear<false>)->Name("linear/serial")->Arg(256)->Arg(4096);
BENCHMARK(BM_Linear<true>)->Name("linear/parallel")->Arg(256)->Arg(4096);
BENCHMARK(BM_LinearBackwardWeights<false>)->Name("linear_backward_weights/serial")->Arg(256)->Arg(4096);
BENCHMARK(BM_LinearBackwardWeights<true>)->Name("linear_backward_weights/parallel")->Arg(256)->Arg(4096);
BENCHMARK(BM_PairwiseDistances<false>)->Name("pairwise_sq_distances/serial")->Arg(500)->Arg(1500);
BENCHMARK(BM_PairwiseDistances<true>)->Name("pairwise_sq_distances/parallel")->Arg(500)->Arg(1500);
BENCHMARK(BM_BatchGradient<false>)->Name("batch_gradient/serial")->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradient<true>)->Name("batch_gradient/parallel")->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

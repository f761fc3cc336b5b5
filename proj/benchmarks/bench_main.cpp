#include <benchmark/benchmark.h>

#include "ccr/change.hpp"
#include "ccr/eval.hpp"
#include "ccr/geometry.hpp"
#include "ccr/random.hpp"
#include "ccr/vocabulary.hpp"

namespace {

std::vector<double> uniform(ccr::Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.uniform01();
    }
    return v;
}

void BM_Quantize(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const std::size_t dim = 16;
    ccr::Rng rng(1);
    const ccr::Vocabulary vocab(dim, uniform(rng, k * dim));
    std::vector<std::vector<double>> queries;
    for (int i = 0; i < 256; ++i) {
        queries.push_back(uniform(rng, dim));
    }
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(vocab.quantize(queries[i++ % queries.size()]));
    }
}
BENCHMARK(BM_Quantize)->Arg(256)->Arg(2048)->Arg(16384);

void BM_KMeans(benchmark::State& state) {
    ccr::Rng rng(2);
    std::vector<std::vector<double>> training;
    for (int i = 0; i < 6000; ++i) {
        training.push_back(uniform(rng, 16));
    }
    ccr::KMeansParams p;
    p.k = static_cast<std::size_t>(state.range(0));
    p.max_iters = 3;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ccr::build_vocabulary(training, p));
    }
}
BENCHMARK(BM_KMeans)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_KnnWords(benchmark::State& state) {
    ccr::SceneSpec spec;
    spec.n_refs = 1;
    const auto scene = ccr::generate_scene(spec);
    ccr::Rng rng(3);
    const ccr::Vocabulary vocab(16, uniform(rng, 2048 * 16));
    const auto img = ccr::index_image(scene.refs[0], vocab);
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& f = scene.query.features[i++ % scene.query.features.size()];
        benchmark::DoNotOptimize(ccr::knn_words(f.desc, img, vocab, 10));
    }
}
BENCHMARK(BM_KnnWords);

void BM_Delaunay(benchmark::State& state) {
    ccr::Rng rng(4);
    std::vector<ccr::Point> pts(static_cast<std::size_t>(state.range(0)));
    for (auto& p : pts) {
        p = {rng.uniform(0, 1000), rng.uniform(0, 1000)};
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(ccr::delaunay_adjacency(pts));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Delaunay)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

void BM_Detect(benchmark::State& state) {
    ccr::SceneSpec spec;
    spec.n_refs = 10;
    const auto scene = ccr::generate_scene(spec);
    std::vector<std::vector<double>> training;
    for (const auto& r : scene.refs) {
        for (const auto& f : r.features) {
            training.push_back(f.desc);
        }
    }
    ccr::KMeansParams kp;
    kp.k = 1024;
    kp.max_iters = 1;
    auto vocab = std::make_shared<const ccr::Vocabulary>(ccr::build_vocabulary(training, kp));
    const auto idx = ccr::build_index(scene.refs, vocab);
    ccr::DetectOptions opts;
    opts.lg = state.range(0) >= 1;
    opts.va = state.range(0) >= 2;
    opts.n_refs = spec.n_refs;
    state.SetLabel(opts.label());
    for (auto _ : state) {
        benchmark::DoNotOptimize(ccr::detect_changes(scene.query, idx, nullptr, opts));
    }
}
BENCHMARK(BM_Detect)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include "truthsr/evidential.hpp"
#include "truthsr/gru.hpp"
#include "truthsr/synthetic.hpp"
#include "truthsr/train.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace truthsr;

MatF random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double s) {
  MatF m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = static_cast<float>(rng.uniform(-s, s));
  return m;
}

void bench_gru_encode(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int n = 50;
  Rng rng(42);
  GruParams<float> stack;
  for (int l = 0; l < 2; ++l) {
    GruLayer<float> layer;
    layer.wz = random_mat(rng, d, d, 0.1);
    layer.uz = random_mat(rng, d, d, 0.1);
    layer.wr = random_mat(rng, d, d, 0.1);
    layer.ur = random_mat(rng, d, d, 0.1);
    layer.wh = random_mat(rng, d, d, 0.1);
    layer.uh = random_mat(rng, d, d, 0.1);
    layer.bz = VecF::Zero(d);
    layer.br = VecF::Zero(d);
    layer.bh = VecF::Zero(d);
    stack.layers.push_back(std::move(layer));
  }
  const MatF x = random_mat(rng, d, n, 1.0);
  for (auto _ : state) {
    VecF h = encode_view(x, stack);
    benchmark::DoNotOptimize(h.data());
  }
}
BENCHMARK(bench_gru_encode)->Arg(64)->Arg(128);

void bench_ds_combine(benchmark::State& state) {
  const int classes = static_cast<int>(state.range(0));
  Rng rng(7);
  Evidence<double> e1{VecD(classes)}, e2{VecD(classes)};
  for (int i = 0; i < classes; ++i) {
    e1.e[i] = rng.uniform(0.0, 3.0);
    e2.e[i] = rng.uniform(0.0, 3.0);
  }
  const Opinion<double> a = opinion_from_evidence(e1);
  const Opinion<double> b = opinion_from_evidence(e2);
  for (auto _ : state) {
    Opinion<double> j = ds_combine(a, b);
    benchmark::DoNotOptimize(j.b.data());
  }
}
BENCHMARK(bench_ds_combine)->Arg(30)->Arg(1000);

void bench_train_batch(benchmark::State& state) {
  const SyntheticData data = generate_synthetic(3, 12, 10, 0.9);
  const SplitDataset split = chronological_split(data.dataset);
  const ReviewBankIndex banks(split, data.store);

  ModelConfig cfg;
  cfg.item_count = split.item_count();
  cfg.d_i = cfg.d_m = cfg.d_h = 32;
  cfg.d_t = data.store.text_dim();
  cfg.d_v = data.store.image_dim();
  cfg.max_len = 10;
  ModelParams<float> params = init_params<float>(cfg, 11);

  const std::vector<Sample> samples = make_train_samples(split, cfg.max_len);
  const std::size_t batch = std::min<std::size_t>(8, samples.size());
  const std::span<const Sample> slice(samples.data(), batch);

  for (auto _ : state) {
    BatchGradients<float> g = compute_gradients(params, slice, split, data.store, banks);
    benchmark::DoNotOptimize(g.loss);
  }
}
BENCHMARK(bench_train_batch);

}  // namespace

BENCHMARK_MAIN();

// Microbenchmarks for the hot paths of the training loop. Build with
// -DCMAKE_BUILD_TYPE=Release and run ./benchmarks/tdg_bench.

#include <benchmark/benchmark.h>

#include "tdg/classifier.hpp"
#include "tdg/experiments.hpp"
#include "tdg/prompt.hpp"
#include "tdg/rng.hpp"
#include "tdg/synthetic.hpp"
#include "tdg/train.hpp"

using namespace tdg;

namespace {

struct GridFixture {
  TextEncoder enc;
  PromptTemplate tpl;
  std::vector<Vec> category_tokens;
  DomainWordPool pool;
  std::vector<Vec> image_feats;
  std::vector<int> labels;

  GridFixture() {
    RngStream rng(0, "bench-grid");
    enc = make_text_encoder(16, 32, rng);
    tpl.ctx1 = rng.gaussian_vec(32, 0.02);
    tpl.ctx2 = rng.gaussian_vec(32, 0.02);
    for (int i = 0; i < 5; ++i) {
      category_tokens.push_back(rng.gaussian_vec(32, 1.0));
    }
    pool = default_pool();
    for (std::size_t j = 0; j < pool.size(); ++j) {
      pool.token_embeddings.push_back(rng.gaussian_vec(32, 1.0));
    }
    for (int n = 0; n < 32; ++n) {
      image_feats.push_back(rng.gaussian_vec(16, 1.0));
      labels.push_back(n % 5);
    }
  }
};

const GridFixture& fixture() {
  static const GridFixture f;
  return f;
}

void BM_encode_text(benchmark::State& state) {
  const auto& f = fixture();
  const auto seq = fill_template(f.tpl, f.pool.token_embeddings[0],
                                 f.category_tokens[0]);
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_text(f.enc, seq));
  }
}
BENCHMARK(BM_encode_text);

void BM_build_text_grid(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        build_text_grid(f.tpl, f.enc, f.category_tokens, f.pool));
  }
}
BENCHMARK(BM_build_text_grid);

void BM_prompt_loss_and_grads(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(prompt_loss_and_grads(
        f.tpl, f.enc, f.image_feats, f.labels, f.category_tokens, f.pool, 0.3));
  }
}
BENCHMARK(BM_prompt_loss_and_grads);

void BM_normalized_backward(benchmark::State& state) {
  RngStream rng(1, "bench-backward");
  NormalizedClassifier cls;
  cls.heads = rng.gaussian_mat(5, 16, 1.0);
  cls.logit_scale = 10.0;
  const Vec z = rng.gaussian_vec(16, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(normalized_backward(cls, z, 2));
  }
}
BENCHMARK(BM_normalized_backward);

void BM_generate_default_benchmark(benchmark::State& state) {
  const BenchmarkSpec spec;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_benchmark(spec));
  }
}
BENCHMARK(BM_generate_default_benchmark);

void BM_train_tdg_100_steps(benchmark::State& state) {
  BenchmarkSpec spec;
  const MultiDomainDataset ds = generate_benchmark(spec);
  TrainConfig config;
  config.total_steps = 100;
  config.warmup_steps = 10;
  const auto [sources, target] = leave_one_domain_out(ds, 0);
  SplitPlan split = split_train_val(ds, sources, 0);
  split.target_domain = target;
  const DomainWordPool pool = default_pool();
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(config, ds, split, pool));
  }
}
BENCHMARK(BM_train_tdg_100_steps)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

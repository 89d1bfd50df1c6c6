#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "ctxsim/losses.hpp"
#include "ctxsim/oracle.hpp"
#include "ctxsim/similarity.hpp"

namespace {

using namespace ctxsim;

Matrix random_similarity(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix f(n, 3);
  for (int i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (int j = 0; j < 3; ++j) {
      f(i, j) = gauss(rng);
      norm2 += f(i, j) * f(i, j);
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (int j = 0; j < 3; ++j) f(i, j) *= inv;
  }
  Matrix s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < 3; ++p) acc += f(i, p) * f(j, p);
      s(i, j) = acc;
    }
  return s;
}

Matrix block_labels_y(int n) {
  Matrix y(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) y(i, j) = (i / 4 == j / 4) ? 1.0 : 0.0;
  return y;
}

void bench_pipeline_forward(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Matrix s = random_similarity(n, 11);
  ThetaConfig theta;
  for (auto _ : state) {
    Tape tape;
    Tensor d = pairwise_sqdist_from_cosine(tape.constant(s));
    PipelineResult pr = contextual_similarity_pipeline(d, 4, 0.05, theta);
    benchmark::DoNotOptimize(pr.step3.w.value().data());
  }
}
BENCHMARK(bench_pipeline_forward)->Arg(8)->Arg(32)->Arg(128);

void bench_pipeline_backward(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Matrix s = random_similarity(n, 11);
  Matrix y = block_labels_y(n);
  ThetaConfig theta;
  for (auto _ : state) {
    Tape tape;
    Tensor sv = tape.leaf(s, true);
    Tensor d = pairwise_sqdist_from_cosine(sv);
    PipelineResult pr = contextual_similarity_pipeline(d, 4, 0.05, theta);
    Tensor loss = contextual_loss(pr.step3.w, y);
    tape.backward(loss);
    benchmark::DoNotOptimize(sv.grad().data());
  }
}
BENCHMARK(bench_pipeline_backward)->Arg(8)->Arg(32)->Arg(128);

void bench_oracle_forward(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Matrix s = random_similarity(n, 11);
  for (auto _ : state) {
    Matrix w = oracle_pipeline_forward(s, 4, 0.05);
    benchmark::DoNotOptimize(w.data());
  }
}
BENCHMARK(bench_oracle_forward)->Arg(8)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();

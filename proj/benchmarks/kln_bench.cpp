#include <benchmark/benchmark.h>

#include <random>

#include "kln/cmmd.hpp"
#include "kln/data.hpp"
#include "kln/kernels.hpp"
#include "kln/training.hpp"

namespace {

using kln::KernelSpec;
using kln::Mat;

Mat random_mat(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Mat one_hot_rows(Eigen::Index n, int classes) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(i % classes);
  return kln::one_hot(y, classes);
}

const KernelSpec kMixture = KernelSpec::gaussian_mixture({1, 3, 5, 7, 9});

void BM_Gram(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const Mat a = random_mat(n, 128, 1);
  for (auto _ : state) benchmark::DoNotOptimize(kln::gram(kMixture, a, a));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Gram)->Arg(50)->Arg(100)->Arg(200)->Arg(400)->Complexity();

void BM_CmmdForward(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const Mat zs = random_mat(n, 128, 2), zt = random_mat(n, 128, 3);
  const Mat ys = one_hot_rows(n, 10);
  const Mat yt = Mat::Constant(n, 10, 0.1);
  for (auto _ : state) {
    const auto pack = kln::make_gram_pack(kMixture, kMixture, zs, ys, zt, yt, 0.1);
    benchmark::DoNotOptimize(kln::cmmd_value(pack).total);
  }
}
BENCHMARK(BM_CmmdForward)->Arg(50)->Arg(100)->Arg(200);

void BM_CmmdForwardBackward(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const Mat zs = random_mat(n, 128, 2), zt = random_mat(n, 128, 3);
  const Mat ys = one_hot_rows(n, 10);
  const Mat yt = Mat::Constant(n, 10, 0.1);
  kln::CmmdTape tape(kMixture, kMixture, 0.1);
  for (auto _ : state) {
    tape.forward(zs, ys, zt, yt);
    benchmark::DoNotOptimize(tape.backward());
  }
}
BENCHMARK(BM_CmmdForwardBackward)->Arg(50)->Arg(100)->Arg(200);

// One supervised step with the default 784-512-256-128 model and batch 100.
void BM_SupervisedStep(benchmark::State& state) {
  const Eigen::Index batch = state.range(0);
  std::mt19937_64 rng(4);
  kln::TrainConfig cfg;
  auto params = kln::make_model(784, 10, cfg.arch, rng);
  kln::Trainer trainer(std::move(params), cfg);
  const Mat xs = (random_mat(batch, 784, 5).array() * 0.5 + 0.5).cwiseMax(0.0).cwiseMin(1.0);
  const Mat xt = (random_mat(batch, 784, 6).array() * 0.5 + 0.5).cwiseMax(0.0).cwiseMin(1.0);
  kln::Batch bs{xs, {}}, bt{xt, {}};
  for (Eigen::Index i = 0; i < batch; ++i) bs.y.push_back(static_cast<int>(i % 10));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.supervised_step(bs, bt, 1e-3).total);
}
BENCHMARK(BM_SupervisedStep)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

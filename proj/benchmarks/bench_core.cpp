#include <benchmark/benchmark.h>

#include <random>

#include "sifr/data.hpp"
#include "sifr/geometry.hpp"
#include "sifr/pipeline.hpp"
#include "sifr/pointops.hpp"
#include "sifr/tensor.hpp"

namespace {

sifr::Tensor random_tensor(std::size_t rows, std::size_t cols,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  sifr::Tensor t(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t.at(i, j) = normal(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const sifr::Tensor a = random_tensor(n, n, 1);
  const sifr::Tensor b = random_tensor(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sifr::matmul(a, b));
  }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_FarthestPointSample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sifr::Tensor pts(n, 3);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < 3; ++d) pts.at(i, d) = u(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sifr::farthest_point_sample(pts, n / 4, 0));
  }
}
BENCHMARK(BM_FarthestPointSample)->Arg(128)->Arg(512)->Arg(2048);

void BM_Iou3d(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<sifr::Box3D, sifr::Box3D>> pairs;
  for (int i = 0; i < 64; ++i) {
    auto box = [&] {
      return sifr::Box3D(u(rng), u(rng), u(rng), 0.5 + u(rng), 0.5 + u(rng),
                         0.5 + u(rng), (2.0 * u(rng) - 1.0) * sifr::kPi);
    };
    pairs.emplace_back(box(), box());
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& [a, b] = pairs[i++ % pairs.size()];
    benchmark::DoNotOptimize(sifr::iou_3d(a, b));
  }
}
BENCHMARK(BM_Iou3d);

sifr::RunConfig slim_config() {
  sifr::RunConfig cfg;
  cfg.unet.sa1_centroids = 32;
  cfg.unet.sa1_group = 16;
  cfg.unet.sa1_mlp = {16, 32};
  cfg.unet.sa2_centroids = 8;
  cfg.unet.sa2_group = 8;
  cfg.unet.sa2_mlp = {32, 64};
  cfg.unet.sift_width = 64;
  cfg.unet.global_mlp = {64, 64};
  cfg.unet.fp_widths = {32, 32, 32};
  cfg.unet.head_hidden = 32;
  cfg.tnet.sa_mlp = {32, 64};
  cfg.tnet.hidden = 32;
  cfg.senet.conv1 = 32;
  cfg.senet.conv2 = 64;
  cfg.senet.conv3 = 64;
  cfg.senet.lift = 64;
  cfg.senet.fc1 = 64;
  cfg.senet.fc2 = 32;
  return cfg;
}

void BM_PipelineForward(benchmark::State& state) {
  sifr::RunConfig cfg = slim_config();
  cfg.synth.points_per_sample = static_cast<std::size_t>(state.range(0));
  sifr::Pipeline p(cfg);
  p.store.init_random(1);
  std::mt19937_64 rng(1);
  const sifr::FrustumSample s = sifr::generate_sample(cfg.synth, 0, rng);
  const sifr::TapeBinding bind(nullptr, p.params());
  for (auto _ : state) {
    benchmark::DoNotOptimize(sifr::forward_sample(p, bind, s));
  }
}
BENCHMARK(BM_PipelineForward)->Arg(32)->Arg(128)->Arg(512);

void BM_PipelineForwardBackward(benchmark::State& state) {
  sifr::RunConfig cfg = slim_config();
  cfg.synth.points_per_sample = static_cast<std::size_t>(state.range(0));
  sifr::Pipeline p(cfg);
  p.store.init_random(1);
  std::mt19937_64 rng(1);
  const sifr::FrustumSample s = sifr::generate_sample(cfg.synth, 0, rng);
  const std::vector<sifr::Parameter*> params = p.params();
  for (auto _ : state) {
    sifr::Tape tape;
    const sifr::TapeBinding bind(&tape, params);
    const sifr::ForwardResult f = sifr::forward_sample(p, bind, s);
    const sifr::TotalLossInputs parts = sifr::build_losses(p, f, s, true);
    tape.backward(sifr::total_loss(parts, cfg.weights));
  }
}
BENCHMARK(BM_PipelineForwardBackward)->Arg(32)->Arg(128)->Arg(512);

}  // namespace

BENCHMARK_MAIN();

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "beamshift/beam_model.hpp"
#include "beamshift/geometry.hpp"
#include "beamshift/object_graph.hpp"
#include "beamshift/rbrs.hpp"
#include "beamshift/scene_synth.hpp"
#include "beamshift/self_train.hpp"

using namespace beamshift;

namespace {

// A full sweep of `beams` uniform beams over [-24, -2] degrees, 0.3 degree azimuth step.
PointCloud sweep(std::size_t beams) {
  ScannerSpec s;
  s.beam_zeniths = uniform_beams(beams, -24.0 * std::numbers::pi / 180, -2.0 * std::numbers::pi / 180);
  s.azimuth_step = 2.0 * std::numbers::pi / 1200.0;
  s.max_range = 60.0;
  s.noise_sigma = 0.02;
  SceneSpec scene;
  scene.objects.push_back({{10, 2, 3.9, 1.6, 0.3}, 1.56, 0});
  scene.objects.push_back({{-7, 12, 4.1, 1.7, -1.0}, 1.5, 0});
  return render_scene(s, scene).cloud;
}

std::vector<BoxPrediction> random_boxes(std::size_t n, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-20, 20), size(1, 4), yaw(-1, 1), f(-1, 1);
  std::vector<BoxPrediction> out(n);
  for (auto& b : out) {
    b.center = {pos(rng), pos(rng), -1.0};
    b.size = {size(rng), size(rng), 1.5};
    b.yaw = yaw(rng);
    b.confidence = 0.9;
    b.feature = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(channels), [&] { return f(rng); });
  }
  return out;
}

void BM_RotatedIou(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(-2, 2), size(0.5, 4), ang(-3.14, 3.14);
  std::vector<BevBox> boxes(256);
  for (auto& b : boxes) b = {pos(rng), pos(rng), size(rng), size(rng), ang(rng)};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rotated_bev_iou(boxes[i % 256], boxes[(i * 7 + 3) % 256]));
    ++i;
  }
}
BENCHMARK(BM_RotatedIou);

void BM_ClusterBeams(benchmark::State& state) {
  const auto beams = static_cast<std::size_t>(state.range(0));
  const PointCloud cloud = sweep(beams);
  for (auto _ : state) benchmark::DoNotOptimize(cluster_beams(cloud, beams));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * cloud.size()));
}
BENCHMARK(BM_ClusterBeams)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Downsample(benchmark::State& state) {
  const PointCloud cloud = sweep(64);
  const BeamModel model = cluster_beams(cloud, 64);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(downsample(cloud, model, {75.0}, seed++));
}
BENCHMARK(BM_Downsample)->Unit(benchmark::kMillisecond);

void BM_Upsample(benchmark::State& state) {
  const PointCloud cloud = sweep(32);
  const BeamModel model = cluster_beams(cloud, 32);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(upsample(cloud, model, {25.0}, seed++));
}
BENCHMARK(BM_Upsample)->Unit(benchmark::kMillisecond);

void BM_ApplyRbrs(benchmark::State& state) {
  const PointCloud cloud = sweep(64);
  RbrsConfig cfg{RbrsMode::kDownsample, {75.0}, {}, 0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_rbrs(cloud, 64, cfg));
    ++cfg.seed;
  }
}
BENCHMARK(BM_ApplyRbrs)->Unit(benchmark::kMillisecond);

void BM_ConsistencyLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto teacher = random_boxes(n, 16, 2);
  auto student = teacher;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0, 0.1);
  for (auto& b : student) {
    b.center += Eigen::Vector3d(d(rng), d(rng), 0);
    for (auto& x : b.feature) x += d(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_consistency(teacher, student, {}, {}, {}));
  }
}
BENCHMARK(BM_ConsistencyLoss)->Arg(8)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_Glr(benchmark::State& state) {
  const auto n = state.range(0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Random(n, n).cwiseAbs();
  w = (w + w.transpose()) / 2;
  w.diagonal().setZero();
  const Eigen::MatrixXd f = Eigen::MatrixXd::Random(n, 64);
  for (auto _ : state) benchmark::DoNotOptimize(glr(w, f));
}
BENCHMARK(BM_Glr)->Arg(32)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_EmaUpdate(benchmark::State& state) {
  DetectorParams t, s;
  t.theta.assign(static_cast<std::size_t>(state.range(0)), 1.0);
  s.theta.assign(t.theta.size(), 2.0);
  for (auto _ : state) {
    t = ema_update(t, s, {});
    benchmark::DoNotOptimize(t.theta.data());
  }
}
BENCHMARK(BM_EmaUpdate)->Arg(9)->Arg(1 << 16);

}  // namespace
BENCHMARK_MAIN();

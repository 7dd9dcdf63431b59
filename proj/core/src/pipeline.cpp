#include "beamshift/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>

#include "beamshift/error.hpp"
#include "beamshift/random.hpp"

namespace beamshift {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

constexpr std::uint64_t kSourceDomain = 0x737263ULL;
constexpr std::uint64_t kTargetDomain = 0x746774ULL;

double final_mse(const TrainReport& report) {
  return report.epochs.empty() ? report.initial_mse : report.epochs.back().student_mse;
}

}  // namespace

SelfTrainOutcome run_selftrain(std::span<const LabeledFrame> source,
                               std::span<const PointCloud> target,
                               std::span<const std::vector<LabeledBox>> target_labels,
                               const PipelineConfig& cfg, std::uint64_t seed, std::size_t jobs) {
  const ToyDetector detector(cfg.detector);
  PretrainConfig pre = cfg.pretrain;
  pre.seed = seed;
  DtsConfig dts = cfg.dts;
  dts.jobs = jobs;

  SelfTrainOutcome out;
  out.pretrained = pretrain(source, detector, detector.initial_params(), pre, &out.pretrain_losses);
  DtsResult trained = dts_train(target, detector, out.pretrained, dts, cfg.selftrain_epochs,
                                mix_seed(seed, streams::kFrameSeed, 1), target_labels);
  out.source_only_mse = trained.report.initial_mse;
  out.report = std::move(trained.report);
  out.student = std::move(trained.student);
  out.teacher = std::move(trained.teacher);
  return out;
}

SceneSpec random_scene(const DomainSpec& domain, std::size_t index) {
  if (!(domain.min_distance > 0.0) || !(domain.min_distance < domain.max_distance)) {
    throw Error(ErrorCode::kInvalidArgument, "domain distance band is empty");
  }
  const std::uint64_t scene_seed = mix_seed(domain.seed, streams::kSceneLayout, index);
  std::uint64_t draw = 0;
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * counter_uniform(scene_seed, streams::kSceneLayout, draw++);
  };

  SceneSpec scene;
  scene.ground_z = domain.ground_z;
  scene.seed = mix_seed(scene_seed, streams::kRangeNoise, 0);
  const std::size_t max_attempts = 50 * domain.objects_per_scene;
  for (std::size_t attempt = 0;
       attempt < max_attempts && scene.objects.size() < domain.objects_per_scene; ++attempt) {
    // Uniform over the annulus area.
    const double r2min = domain.min_distance * domain.min_distance;
    const double r2max = domain.max_distance * domain.max_distance;
    const double r = std::sqrt(uniform(r2min, r2max));
    const double az = uniform(-std::numbers::pi, std::numbers::pi);
    const double yaw = uniform(-std::numbers::pi, std::numbers::pi);
    Eigen::Vector3d size;
    for (int d = 0; d < 3; ++d) {
      size[d] = domain.mean_size[d] + domain.size_bias[d] +
                uniform(-domain.size_jitter[d], domain.size_jitter[d]);
    }
    SceneObject obj;
    obj.box = {r * std::cos(az), r * std::sin(az), size.x(), size.y(), yaw};
    obj.height = size.z();
    bool clear = true;
    for (const auto& other : scene.objects) {
      if (std::hypot(other.box.cx - obj.box.cx, other.box.cy - obj.box.cy) < domain.min_separation) {
        clear = false;
        break;
      }
    }
    if (clear) scene.objects.push_back(obj);
  }
  return scene;
}

std::vector<LabeledFrame> make_domain(const DomainSpec& domain, std::size_t jobs) {
  std::vector<LabeledFrame> frames(domain.scenes);
  auto render = [&](std::size_t i) {
    RenderedScene r = render_scene(domain.scanner, random_scene(domain, i));
    frames[i] = {std::move(r.cloud), std::move(r.labels)};
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, frames.size()));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t j = 1; j < jobs; ++j) {
    pool.emplace_back([&, j] {
      try {
        for (std::size_t i = j; i < frames.size(); i += jobs) render(i);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  try {
    for (std::size_t i = 0; i < frames.size(); i += jobs) render(i);
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return frames;
}

AdaptationBenchmark standard_benchmark(std::uint64_t seed) {
  AdaptationBenchmark b;
  b.seed = seed;
  ScannerSpec scanner;
  scanner.azimuth_step = 2.0 * std::numbers::pi / 1200.0;
  scanner.max_range = 60.0;
  scanner.noise_sigma = 0.02;

  b.source.scanner = scanner;
  b.source.scanner.beam_zeniths = uniform_beams(64, -24.0 * kDeg, -2.0 * kDeg);
  b.source.size_bias = Eigen::Vector3d::Constant(0.2);
  b.source.seed = mix_seed(seed, streams::kSceneLayout, kSourceDomain);

  b.target.scanner = scanner;
  b.target.scanner.beam_zeniths = uniform_beams(32, -24.0 * kDeg, -2.0 * kDeg);
  b.target.seed = mix_seed(seed, streams::kSceneLayout, kTargetDomain);

  b.pipeline.pretrain.beam_count = 64;
  b.pipeline.pretrain.epochs = 10;
  b.pipeline.dts.beam_count = 32;
  b.pipeline.selftrain_epochs = 20;
  return b;
}

LadderResult run_ladder(const AdaptationBenchmark& bench, std::size_t jobs) {
  const std::vector<LabeledFrame> source = make_domain(bench.source, jobs);
  const std::vector<LabeledFrame> target_frames = make_domain(bench.target, jobs);
  std::vector<PointCloud> target;
  std::vector<std::vector<LabeledBox>> labels;
  for (const auto& f : target_frames) {
    target.push_back(f.cloud);
    labels.push_back(f.labels);
  }

  const PipelineConfig& base = bench.pipeline;
  const ToyDetector detector(base.detector);
  const auto target_obs = observe_all(target, detector, jobs);
  LadderResult out;

  PretrainConfig plain = base.pretrain;
  plain.seed = bench.seed;
  plain.augmentation.mode = RbrsMode::kPassthrough;
  const DetectorParams plain_params = pretrain(source, detector, detector.initial_params(), plain);
  out.plain_pretrain =
      evaluate_box_error(target_obs, labels, detector, plain_params, base.dts.match).mse;

  PretrainConfig resampled = base.pretrain;
  resampled.seed = bench.seed;
  const DetectorParams pretrained =
      pretrain(source, detector, detector.initial_params(), resampled);
  out.source_only = evaluate_box_error(target_obs, labels, detector, pretrained, base.dts.match).mse;

  const std::uint64_t train_seed = mix_seed(bench.seed, streams::kFrameSeed, 1);
  auto variant = [&](double beta1, double beta2) {
    DtsConfig cfg = base.dts;
    cfg.jobs = jobs;
    cfg.consistency.beta1 = beta1;
    cfg.consistency.beta2 = beta2;
    DtsResult r = dts_train(target, detector, pretrained, cfg, base.selftrain_epochs, train_seed, labels);
    out.reports.push_back(r.report);
    return final_mse(r.report);
  };
  const ConsistencyConfig& c = base.dts.consistency;
  out.teacher_student = variant(0.0, 0.0);
  out.node_only = variant(c.beta1, 0.0);
  out.full = variant(c.beta1, c.beta2);
  return out;
}

}  // namespace beamshift

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "beamshift/scene_synth.hpp"
#include "beamshift/self_train.hpp"
#include "beamshift/toy_detector.hpp"

namespace beamshift {

/// Every tunable of the pipeline. The shipped defaults are the default
/// member values.
struct PipelineConfig {
  static constexpr int kVersion = 1;

  DtsConfig dts;
  PretrainConfig pretrain;
  std::size_t selftrain_epochs = 20;
  ToyDetectorConfig detector;
};

struct SelfTrainOutcome {
  std::vector<double> pretrain_losses;
  double source_only_mse = 0.0;  // pre-trained model on the target set; NaN without labels
  TrainReport report;
  DetectorParams pretrained;
  DetectorParams student;
  DetectorParams teacher;
};

/// Pre-trains on the labeled source frames, then self-trains on the target
/// clouds. Target labels, if given, only feed the evaluation columns.
SelfTrainOutcome run_selftrain(std::span<const LabeledFrame> source,
                               std::span<const PointCloud> target,
                               std::span<const std::vector<LabeledBox>> target_labels,
                               const PipelineConfig& cfg, std::uint64_t seed, std::size_t jobs = 1);

/// Random street scenes seen by one scanner.
struct DomainSpec {
  ScannerSpec scanner;
  std::size_t scenes = 50;
  std::size_t objects_per_scene = 8;
  double ground_z = -1.73;
  double min_distance = 6.0;  // object center range from the sensor, meters
  double max_distance = 35.0;
  double min_separation = 7.0;  // between object centers, meters
  Eigen::Vector3d mean_size{3.9, 1.6, 1.56};
  Eigen::Vector3d size_jitter{0.3, 0.1, 0.08};  // half-width of the uniform spread
  Eigen::Vector3d size_bias = Eigen::Vector3d::Zero();
  std::uint64_t seed = 0;
};

SceneSpec random_scene(const DomainSpec& domain, std::size_t index);
std::vector<LabeledFrame> make_domain(const DomainSpec& domain, std::size_t jobs = 1);

/// Source (dense scanner, enlarged objects) to target (sparse scanner,
/// nominal objects) adaptation task.
struct AdaptationBenchmark {
  DomainSpec source;
  DomainSpec target;
  PipelineConfig pipeline;
  std::uint64_t seed = 0;
};

/// 64 uniform beams with a +0.2 m size bias to 32 uniform beams, 50 scenes
/// each, 10 pre-training and 20 self-training epochs.
AdaptationBenchmark standard_benchmark(std::uint64_t seed = 0);

/// Final target box error of each training recipe.
struct LadderResult {
  double plain_pretrain = 0.0;   // source-only, no re-sampling
  double source_only = 0.0;      // source-only with re-sampling
  double teacher_student = 0.0;  // self-training, detection loss only
  double node_only = 0.0;        // plus node-level consistency
  double full = 0.0;             // plus edge-level consistency
  std::vector<TrainReport> reports;  // teacher_student, node_only, full
};

LadderResult run_ladder(const AdaptationBenchmark& bench, std::size_t jobs = 1);

}  // namespace beamshift

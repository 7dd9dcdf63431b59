#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "beamshift/detector.hpp"
#include "beamshift/object_graph.hpp"
#include "beamshift/rbrs.hpp"
#include "beamshift/scene_synth.hpp"

namespace beamshift {

struct PseudoLabelConfig {
  double c_th = 0.5;
};

struct EmaConfig {
  double alpha = 0.999;
};

/// Teacher predictions with confidence strictly above c_th, order preserved.
std::vector<BoxPrediction> filter_pseudo_labels(std::span<const BoxPrediction> predictions,
                                                const PseudoLabelConfig& cfg);

std::vector<LabeledBox> to_labels(std::span<const BoxPrediction> predictions);

/// theta_T' = alpha * theta_T + (1 - alpha) * theta_S.
DetectorParams ema_update(const DetectorParams& teacher, const DetectorParams& student,
                          const EmaConfig& cfg);

inline double total_loss(double det_loss, double cons_loss) { return det_loss + cons_loss; }

/// (model - source) / (oracle - source) * 100.
double closed_gap(double ap_model, double ap_source, double ap_oracle);

/// Seed for frame `frame` of epoch `epoch`.
std::uint64_t frame_seed(std::uint64_t seed, std::size_t epoch, std::size_t frame) noexcept;

struct DtsConfig {
  PseudoLabelConfig pseudo;
  EmaConfig ema;
  GraphConfig graph;
  MatchConfig match;
  ConsistencyConfig consistency;
  RbrsConfig student_augmentation{RbrsMode::kDownsample, {}, {}, 0};
  std::size_t beam_count = 32;  // nominal beams of the target scanner
  double learning_rate = 1e-2;
  std::size_t jobs = 1;
};

struct StepMetrics {
  double det = 0.0;
  double node = 0.0;
  double edge = 0.0;
  double cons = 0.0;
  double total = 0.0;
  std::size_t pseudo_labels = 0;
  std::size_t matched_pairs = 0;
};

struct StepObjective {
  StepMetrics metrics;
  std::vector<double> gradient;  // d total / d student params
};

/// Loss and student gradient of one self-training step once both branch
/// inputs are fixed: the teacher sees `teacher_obs`, the student
/// `student_obs`.
StepObjective dts_objective(const Observation& teacher_obs, const Observation& student_obs,
                            const DetectorParams& student, const DetectorParams& teacher,
                            const Detector& detector, const DtsConfig& cfg);

struct StepResult {
  DetectorParams student;
  DetectorParams teacher;
  StepMetrics metrics;
};

/// One teacher-student update on an unlabeled target cloud. The student
/// input is the re-sampled cloud (student_augmentation with `seed`).
StepResult dts_step(const PointCloud& target, const DetectorParams& student,
                    const DetectorParams& teacher, const Detector& detector, const DtsConfig& cfg,
                    std::uint64_t seed);

/// Same as dts_step() with a precomputed teacher observation of `target`.
StepResult dts_step(const PointCloud& target, const Observation& teacher_obs,
                    const DetectorParams& student, const DetectorParams& teacher,
                    const Detector& detector, const DtsConfig& cfg, std::uint64_t seed);

struct LabeledFrame {
  PointCloud cloud;
  std::vector<LabeledBox> labels;
};

struct PretrainConfig {
  RbrsConfig augmentation{RbrsMode::kDownsample, {}, {}, 0};
  std::size_t beam_count = 64;  // nominal beams of the source scanner
  std::size_t epochs = 10;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
};

/// Per-frame gradient descent on the detection loss over re-sampled source
/// frames. Epoch-mean losses go to `epoch_losses` when given.
DetectorParams pretrain(std::span<const LabeledFrame> source, const Detector& detector,
                        const DetectorParams& init, const PretrainConfig& cfg,
                        std::vector<double>* epoch_losses = nullptr);

struct BoxError {
  double mse = 0.0;  // mean over matched pairs of |dc|^2 + |db|^2
  std::size_t matched = 0;
  std::size_t labels = 0;
};

/// Box-parameter error of predictions against ground truth, pooled over
/// frames. Observations must come from `detector`.
BoxError evaluate_box_error(std::span<const std::unique_ptr<Observation>> observations,
                            std::span<const std::vector<LabeledBox>> labels,
                            const Detector& detector, const DetectorParams& params,
                            const MatchConfig& match);

BoxError evaluate_box_error(std::span<const LabeledFrame> frames, const Detector& detector,
                            const DetectorParams& params, const MatchConfig& match,
                            std::size_t jobs = 1);

/// Observes every cloud, `jobs` at a time; output order follows the input.
std::vector<std::unique_ptr<Observation>> observe_all(std::span<const PointCloud> clouds,
                                                      const Detector& detector,
                                                      std::size_t jobs = 1);

struct EpochReport {
  double det = 0.0;  // means over the epoch's steps
  double node = 0.0;
  double edge = 0.0;
  double cons = 0.0;
  double total = 0.0;
  std::size_t matched_pairs = 0;  // sums over the epoch
  std::size_t pseudo_labels = 0;
  double student_mse = 0.0;  // NaN without evaluation labels
  double teacher_mse = 0.0;
};

struct TrainReport {
  double initial_mse = 0.0;
  std::vector<EpochReport> epochs;
};

struct DtsResult {
  DetectorParams student;  // the adapted model
  DetectorParams teacher;
  TrainReport report;
};

/// Self-training over unlabeled target clouds. The teacher starts as a copy
/// of the pre-trained parameters. Labels, when given, are used only to fill
/// the evaluation columns of the report.
DtsResult dts_train(std::span<const PointCloud> target, const Detector& detector,
                    const DetectorParams& pretrained, const DtsConfig& cfg, std::size_t epochs,
                    std::uint64_t seed, std::span<const std::vector<LabeledBox>> eval_labels = {});

}  // namespace beamshift

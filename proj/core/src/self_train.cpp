#include "beamshift/self_train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include "beamshift/error.hpp"
#include "beamshift/random.hpp"

namespace beamshift {
namespace {

void check_sizes(const DetectorParams& a, const DetectorParams& b, const char* what) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::string(what) + ": parameter vectors differ in length (" +
                                                std::to_string(a.size()) + " vs " +
                                                std::to_string(b.size()) + ")");
  }
}

void gradient_step(DetectorParams& params, const std::vector<double>& grad, double lr) {
  for (std::size_t i = 0; i < params.theta.size(); ++i) params.theta[i] -= lr * grad[i];
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index writes only
// its own output slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t j = 0; j < jobs; ++j) {
    pool.emplace_back([&, j] {
      try {
        for (std::size_t i = j; i < n; i += jobs) fn(i);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

RbrsConfig seeded(RbrsConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

}  // namespace

std::vector<BoxPrediction> filter_pseudo_labels(std::span<const BoxPrediction> predictions,
                                                const PseudoLabelConfig& cfg) {
  std::vector<BoxPrediction> out;
  for (const auto& p : predictions) {
    if (p.confidence > cfg.c_th) out.push_back(p);
  }
  return out;
}

std::vector<LabeledBox> to_labels(std::span<const BoxPrediction> predictions) {
  std::vector<LabeledBox> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) {
    out.push_back({p.center, p.size, p.yaw, p.class_id, p.confidence});
  }
  return out;
}

DetectorParams ema_update(const DetectorParams& teacher, const DetectorParams& student,
                          const EmaConfig& cfg) {
  check_sizes(teacher, student, "ema_update");
  // Written as a small step from the teacher towards the student: the
  // increment is rounded once inside the fma, so repeated updates drift by
  // a couple of ulps instead of tens.
  const double step = 1.0 - cfg.alpha;
  DetectorParams out = teacher;
  for (std::size_t i = 0; i < out.theta.size(); ++i) {
    out.theta[i] = std::fma(step, student.theta[i] - teacher.theta[i], teacher.theta[i]);
  }
  return out;
}

double closed_gap(double ap_model, double ap_source, double ap_oracle) {
  const double denom = ap_oracle - ap_source;
  if (denom == 0.0 || !std::isfinite(denom)) {
    throw Error(ErrorCode::kDegenerateDenominator, "oracle and source scores coincide");
  }
  return (ap_model - ap_source) / denom * 100.0;
}

std::uint64_t frame_seed(std::uint64_t seed, std::size_t epoch, std::size_t frame) noexcept {
  return mix_seed(mix_seed(seed, streams::kFrameSeed, epoch), streams::kFrameSeed, frame);
}

StepObjective dts_objective(const Observation& teacher_obs, const Observation& student_obs,
                            const DetectorParams& student, const DetectorParams& teacher,
                            const Detector& detector, const DtsConfig& cfg) {
  check_sizes(teacher, student, "dts_objective");
  StepObjective out;
  out.gradient.assign(student.size(), 0.0);

  const std::vector<BoxPrediction> teacher_preds = detector.predict(teacher_obs, teacher);
  const std::vector<BoxPrediction> pseudo = filter_pseudo_labels(teacher_preds, cfg.pseudo);
  out.metrics.pseudo_labels = pseudo.size();
  if (!pseudo.empty()) {
    const std::vector<LabeledBox> labels = to_labels(pseudo);
    const LossAndGradient det = detector.det_loss_and_grad(student_obs, student, labels);
    out.metrics.det = det.value;
    for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += det.gradient[i];
  }

  const std::vector<BoxPrediction> student_preds = detector.predict(student_obs, student);
  const BranchConsistency bc =
      evaluate_consistency(teacher_preds, student_preds, cfg.graph, cfg.match, cfg.consistency);
  out.metrics.matched_pairs = bc.matches.size();
  out.metrics.node = bc.loss.node;
  out.metrics.edge = bc.loss.edge;
  out.metrics.cons = bc.loss.total;
  if (!bc.matches.empty()) {
    std::vector<PredictionGradient> grads(bc.matches.size());
    for (std::size_t i = 0; i < grads.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      grads[i].prediction = bc.student_index[i];
      grads[i].feature = bc.loss.grad_features.row(row).transpose();
      grads[i].box = bc.loss.grad_boxes.row(row).transpose();
    }
    const std::vector<double> g = detector.backprop(student_obs, student, grads);
    for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += g[i];
  }
  out.metrics.total = total_loss(out.metrics.det, out.metrics.cons);
  return out;
}

StepResult dts_step(const PointCloud& target, const Observation& teacher_obs,
                    const DetectorParams& student, const DetectorParams& teacher,
                    const Detector& detector, const DtsConfig& cfg, std::uint64_t seed) {
  const PointCloud augmented =
      apply_rbrs(target, cfg.beam_count, seeded(cfg.student_augmentation, seed));
  const auto student_obs = detector.observe(augmented);
  const StepObjective obj =
      dts_objective(teacher_obs, *student_obs, student, teacher, detector, cfg);
  StepResult out;
  out.student = student;
  gradient_step(out.student, obj.gradient, cfg.learning_rate);
  out.teacher = ema_update(teacher, out.student, cfg.ema);
  out.metrics = obj.metrics;
  return out;
}

StepResult dts_step(const PointCloud& target, const DetectorParams& student,
                    const DetectorParams& teacher, const Detector& detector, const DtsConfig& cfg,
                    std::uint64_t seed) {
  const auto teacher_obs = detector.observe(target);
  return dts_step(target, *teacher_obs, student, teacher, detector, cfg, seed);
}

DetectorParams pretrain(std::span<const LabeledFrame> source, const Detector& detector,
                        const DetectorParams& init, const PretrainConfig& cfg,
                        std::vector<double>* epoch_losses) {
  if (init.size() != detector.parameter_count()) {
    throw Error(ErrorCode::kLengthMismatch, "pretrain: initial parameters have wrong length");
  }
  DetectorParams params = init;
  if (epoch_losses) epoch_losses->clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum = 0.0;
    for (std::size_t f = 0; f < source.size(); ++f) {
      const PointCloud cloud = apply_rbrs(source[f].cloud, cfg.beam_count,
                                          seeded(cfg.augmentation, frame_seed(cfg.seed, epoch, f)));
      const auto obs = detector.observe(cloud);
      const LossAndGradient lg = detector.det_loss_and_grad(*obs, params, source[f].labels);
      sum += lg.value;
      gradient_step(params, lg.gradient, cfg.learning_rate);
    }
    if (epoch_losses) {
      epoch_losses->push_back(source.empty() ? 0.0 : sum / static_cast<double>(source.size()));
    }
  }
  return params;
}

std::vector<std::unique_ptr<Observation>> observe_all(std::span<const PointCloud> clouds,
                                                      const Detector& detector, std::size_t jobs) {
  std::vector<std::unique_ptr<Observation>> out(clouds.size());
  parallel_for(clouds.size(), jobs, [&](std::size_t i) { out[i] = detector.observe(clouds[i]); });
  return out;
}

BoxError evaluate_box_error(std::span<const std::unique_ptr<Observation>> observations,
                            std::span<const std::vector<LabeledBox>> labels,
                            const Detector& detector, const DetectorParams& params,
                            const MatchConfig& match) {
  if (observations.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "evaluate_box_error: observations and labels differ in count");
  }
  BoxError out;
  double sum = 0.0;
  for (std::size_t f = 0; f < observations.size(); ++f) {
    const std::vector<BoxPrediction> preds = detector.predict(*observations[f], params);
    std::vector<BoxPrediction> gt;
    gt.reserve(labels[f].size());
    for (const auto& l : labels[f]) {
      BoxPrediction p;
      p.center = l.center;
      p.size = l.size;
      p.yaw = l.yaw;
      p.class_id = l.class_id;
      gt.push_back(std::move(p));
    }
    out.labels += gt.size();
    for (const auto& m : match_boxes(gt, preds, match)) {
      const auto& g = gt[m.teacher];
      const auto& p = preds[m.student];
      sum += (p.center - g.center).squaredNorm() + (p.size - g.size).squaredNorm();
      ++out.matched;
    }
  }
  out.mse = out.matched ? sum / static_cast<double>(out.matched)
                        : std::numeric_limits<double>::quiet_NaN();
  return out;
}

BoxError evaluate_box_error(std::span<const LabeledFrame> frames, const Detector& detector,
                            const DetectorParams& params, const MatchConfig& match,
                            std::size_t jobs) {
  std::vector<std::unique_ptr<Observation>> obs(frames.size());
  parallel_for(frames.size(), jobs, [&](std::size_t i) { obs[i] = detector.observe(frames[i].cloud); });
  std::vector<std::vector<LabeledBox>> labels;
  labels.reserve(frames.size());
  for (const auto& f : frames) labels.push_back(f.labels);
  return evaluate_box_error(obs, labels, detector, params, match);
}

DtsResult dts_train(std::span<const PointCloud> target, const Detector& detector,
                    const DetectorParams& pretrained, const DtsConfig& cfg, std::size_t epochs,
                    std::uint64_t seed, std::span<const std::vector<LabeledBox>> eval_labels) {
  if (pretrained.size() != detector.parameter_count()) {
    throw Error(ErrorCode::kLengthMismatch, "dts_train: pre-trained parameters have wrong length");
  }
  const bool evaluate = !eval_labels.empty();
  if (evaluate && eval_labels.size() != target.size()) {
    throw Error(ErrorCode::kLengthMismatch, "dts_train: evaluation labels and frames differ in count");
  }
  const auto teacher_obs = observe_all(target, detector, cfg.jobs);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  DtsResult out;
  out.student = pretrained;
  out.teacher = pretrained;
  out.report.initial_mse =
      evaluate ? evaluate_box_error(teacher_obs, eval_labels, detector, pretrained, cfg.match).mse
               : nan;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    EpochReport rep;
    for (std::size_t f = 0; f < target.size(); ++f) {
      StepResult step = dts_step(target[f], *teacher_obs[f], out.student, out.teacher, detector,
                                 cfg, frame_seed(seed, epoch, f));
      out.student = std::move(step.student);
      out.teacher = std::move(step.teacher);
      rep.det += step.metrics.det;
      rep.node += step.metrics.node;
      rep.edge += step.metrics.edge;
      rep.cons += step.metrics.cons;
      rep.total += step.metrics.total;
      rep.matched_pairs += step.metrics.matched_pairs;
      rep.pseudo_labels += step.metrics.pseudo_labels;
    }
    if (!target.empty()) {
      const double n = static_cast<double>(target.size());
      rep.det /= n;
      rep.node /= n;
      rep.edge /= n;
      rep.cons /= n;
      rep.total /= n;
    }
    if (evaluate) {
      rep.student_mse =
          evaluate_box_error(teacher_obs, eval_labels, detector, out.student, cfg.match).mse;
      rep.teacher_mse =
          evaluate_box_error(teacher_obs, eval_labels, detector, out.teacher, cfg.match).mse;
    } else {
      rep.student_mse = nan;
      rep.teacher_mse = nan;
    }
    out.report.epochs.push_back(rep);
  }
  return out;
}

}  // namespace beamshift

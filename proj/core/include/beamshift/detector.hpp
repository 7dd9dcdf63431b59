#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "beamshift/object_graph.hpp"
#include "beamshift/point_cloud.hpp"
#include "beamshift/scene_synth.hpp"

namespace beamshift {

/// Flat parameter vector shared by the student and the teacher.
struct DetectorParams {
  std::vector<double> theta;

  std::size_t size() const noexcept { return theta.size(); }
  friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

/// Parameter-independent preprocessing of one cloud. Detectors derive their
/// own observation types; an observation can be reused across parameter
/// updates.
class Observation {
 public:
  virtual ~Observation() = default;
};

/// Upstream gradient for one prediction: with respect to its feature vector
/// and its 7 box parameters.
struct PredictionGradient {
  std::size_t prediction = 0;
  Eigen::VectorXd feature;
  BoxGradient box = BoxGradient::Zero();
};

struct LossAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
  std::size_t matched = 0;
};

/// Capability a self-training loop needs from a detector. predict() must be
/// deterministic in (observation, params).
class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::size_t parameter_count() const = 0;
  virtual DetectorParams initial_params() const = 0;

  virtual std::unique_ptr<Observation> observe(const PointCloud& cloud) const = 0;

  virtual std::vector<BoxPrediction> predict(const Observation& obs,
                                             const DetectorParams& params) const = 0;

  /// Detection loss against the given boxes and its parameter gradient.
  virtual LossAndGradient det_loss_and_grad(const Observation& obs, const DetectorParams& params,
                                            std::span<const LabeledBox> labels) const = 0;

  /// Chain rule from prediction-level gradients to the parameter vector.
  virtual std::vector<double> backprop(const Observation& obs, const DetectorParams& params,
                                       std::span<const PredictionGradient> grads) const = 0;

  std::vector<BoxPrediction> predict(const PointCloud& cloud, const DetectorParams& params) const {
    return predict(*observe(cloud), params);
  }
};

}  // namespace beamshift

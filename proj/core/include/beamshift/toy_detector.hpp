#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "beamshift/detector.hpp"

namespace beamshift {

struct ToyDetectorConfig {
  double ground_z = -1.73;       // ground plane height in the sensor frame
  double ground_margin = 0.2;    // points below ground_z + margin are ground
  double cluster_distance = 1.0; // single-linkage threshold, meters
  std::size_t min_cluster_points = 3;
  double confidence_points = 5.0;   // n0 in n / (n + n0)
  double feature_scale = 50.0;      // center scale in the feature vector, meters
  double reliability_points = 60.0; // points at which extents and prior weigh equally
  double row_gap = 0.003;           // zenith jump separating scan rows, radians
  // Reference (l, w, h) per class. Clusters take the class whose template
  // best explains their rectangle; templates also seed the size prior.
  std::vector<Eigen::Vector3d> class_templates{Eigen::Vector3d(3.9, 1.6, 1.56)};
  MatchConfig match;             // prediction-to-label matching in det_loss
};

/// Parameter-free description of one segmented object.
struct ClusterSummary {
  std::size_t points = 0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  Eigen::Vector2d rect_center = Eigen::Vector2d::Zero();
  double yaw = 0.0;
  Eigen::Vector3d extent = Eigen::Vector3d::Zero();  // l >= w in BEV, h = top above ground
  double row_spacing = 0.0;  // vertical distance between scan rows at the object, meters
  std::size_t rows = 0;
  double reliability = 0.0;  // weight on measured extents, in [0, 1)
  Eigen::Vector3d observed = Eigen::Vector3d::Ones();  // 1 where a face spans the axis
  int class_id = 0;
  std::vector<std::size_t> members;  // point indices in the observed cloud
};

class ToyObservation final : public Observation {
 public:
  std::vector<ClusterSummary> clusters;
};

/// A small analytic detector for desk-scale experiments.
///
/// Segmentation: ground removal by height, then single-linkage connected
/// components at cluster_distance. Per cluster it fits a minimum-area BEV
/// rectangle, assigns its sides to length and width against the class
/// templates, and measures the height of the top return above ground and the
/// vertical row spacing.
///
/// The rectangle only covers the visible faces, so the predicted box is grown
/// away from the sensor by half its size excess along each axis, and stands
/// on the ground plane.
///
/// Parameters (6 + 3K for K classes):
///   [0..2]   center offset
///   [3..5]   row-spacing gain per size dimension
///   [6..]    size prior per class (l, w, h)
///
/// size_d = r_d * (extent_d + gain_d * row_spacing) + (1 - r_d) * prior_{k,d}
/// with r_d = n / (n + reliability_points) on axes spanned by a visible face
/// and 0 elsewhere.
/// feature = [c / feature_scale, size, sin yaw, cos yaw, n / (n + n0)].
class ToyDetector final : public Detector {
 public:
  static constexpr std::size_t kOffset = 0;
  static constexpr std::size_t kGain = 3;
  static constexpr std::size_t kPrior = 6;
  static constexpr Eigen::Index kFeatureWidth = 9;

  explicit ToyDetector(ToyDetectorConfig config = {});

  const ToyDetectorConfig& config() const noexcept { return config_; }
  std::size_t class_count() const noexcept { return config_.class_templates.size(); }

  std::size_t parameter_count() const override;
  DetectorParams initial_params() const override;

  std::unique_ptr<Observation> observe(const PointCloud& cloud) const override;
  ToyObservation summarize(const PointCloud& cloud) const;

  using Detector::predict;
  std::vector<BoxPrediction> predict(const Observation& obs,
                                     const DetectorParams& params) const override;
  LossAndGradient det_loss_and_grad(const Observation& obs, const DetectorParams& params,
                                    std::span<const LabeledBox> labels) const override;
  std::vector<double> backprop(const Observation& obs, const DetectorParams& params,
                               std::span<const PredictionGradient> grads) const override;

  BoxPrediction predict_one(const ClusterSummary& cluster, const DetectorParams& params) const;

 private:
  const ToyObservation& cast(const Observation& obs) const;
  void check_params(const DetectorParams& params) const;

  ToyDetectorConfig config_;
};

/// Rectangle axes (length, width) oriented away from the sensor.
std::array<Eigen::Vector2d, 2> completion_axes(const ClusterSummary& cluster);

/// Single-linkage connected components under a distance threshold. Labels
/// are dense and ordered by each component's lowest point index.
std::vector<std::vector<std::size_t>> connected_components(std::span<const Eigen::Vector3d> points,
                                                           double threshold);

struct BevRectangle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double yaw = 0.0;     // direction of the longer side, in [-pi/2, pi/2)
  double length = 0.0;  // longer side
  double width = 0.0;
};

/// Minimum-area enclosing rectangle by rotating calipers over the convex hull.
BevRectangle min_area_rectangle(std::span<const Eigen::Vector2d> points);

}  // namespace beamshift

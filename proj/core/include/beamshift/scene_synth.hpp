#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "beamshift/geometry.hpp"
#include "beamshift/point_cloud.hpp"

namespace beamshift {

/// Ground-truth or predicted 3-D box as stored in label files.
struct LabeledBox {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();  // l, w, h
  double yaw = 0.0;
  int class_id = 0;
  std::optional<double> confidence;

  BevBox bev() const noexcept { return {center.x(), center.y(), size.x(), size.y(), yaw}; }
  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

/// Spinning scanner: one ray per (beam zenith, azimuth step) from the origin.
struct ScannerSpec {
  std::vector<double> beam_zeniths;  // radians, strictly increasing
  double azimuth_step = 0.0;         // radians, divides 2*pi
  double max_range = 100.0;          // meters
  double noise_sigma = 0.0;          // meters, applied along the ray

  std::size_t azimuth_count() const;
};

/// Box standing on the ground plane.
struct SceneObject {
  BevBox box;
  double height = 1.5;
  int class_id = 0;
};

struct SceneSpec {
  double ground_z = -1.73;
  std::vector<SceneObject> objects;
  std::uint64_t seed = 0;
};

struct RenderedScene {
  PointCloud cloud;
  std::vector<int> object_ids;      // per point; -1 for ground returns
  std::vector<std::uint32_t> beam;  // per point, index into beam_zeniths
  std::vector<LabeledBox> labels;   // one per scene object
};

std::vector<double> uniform_beams(std::size_t count, double zenith_min, double zenith_max);

/// Gaps shrink geometrically by 1/grade from the lowest beam to the highest.
std::vector<double> graded_beams(std::size_t count, double zenith_min, double zenith_max,
                                 double grade);

void validate(const ScannerSpec& scanner);
void validate(const SceneSpec& scene);

LabeledBox label_of(const SceneObject& object, double ground_z);

/// Ray-casts the scanner against the scene's boxes and ground plane. Points
/// are ordered by (beam, azimuth).
RenderedScene render_scene(const ScannerSpec& scanner, const SceneSpec& scene);

/// Distance of a point to the nearest face of a box (zero on the surface).
double box_surface_residual(const SceneObject& object, double ground_z, const CartesianPoint& p);

}  // namespace beamshift

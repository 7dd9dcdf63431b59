#pragma once

#include <cstddef>
#include <vector>

namespace beamshift {

/// A single LiDAR return in the sensor frame. Coordinates in meters,
/// intensity dimensionless in [0, 1].
struct CartesianPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  friend bool operator==(const CartesianPoint&, const CartesianPoint&) = default;
};

/// Ordered set of points. Order is meaningful: every operation documented as
/// order-preserving keeps the input order of the points it retains.
struct PointCloud {
  std::vector<CartesianPoint> points;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

}  // namespace beamshift

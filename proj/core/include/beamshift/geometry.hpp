#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "beamshift/point_cloud.hpp"

namespace beamshift {

/// Points closer than this to the sensor's vertical axis have no defined
/// azimuth and are rejected by to_spherical().
inline constexpr double kMinHorizontalRadius = 1e-9;

/// Sensor-frame spherical coordinates. zenith is elevation above the
/// horizontal plane in (-pi/2, pi/2), azimuth is atan2(y, x) in (-pi, pi].
struct SphericalPoint {
  double zenith = 0.0;
  double azimuth = 0.0;
  double range = 0.0;
  double intensity = 0.0;
};

SphericalPoint to_spherical(const CartesianPoint& p);
CartesianPoint to_cartesian(const SphericalPoint& s);

/// True when to_spherical() accepts the point.
bool has_azimuth(const CartesianPoint& p) noexcept;

/// Copy of the cloud without points that to_spherical() would reject.
PointCloud filter_degenerate(const PointCloud& cloud);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle) noexcept;

/// Normalizes a heading into [-pi, pi).
double normalize_yaw(double yaw) noexcept;

/// Length of the shorter arc between two azimuths, in [0, pi].
double circular_distance(double a, double b) noexcept;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Rotated rectangle in the bird's-eye-view plane.
struct BevBox {
  double cx = 0.0;
  double cy = 0.0;
  double length = 1.0;  // along the heading
  double width = 1.0;
  double yaw = 0.0;

  /// Corners in counter-clockwise order.
  std::array<Vec2, 4> corners() const noexcept;
  double area() const noexcept { return length * width; }
};

/// Signed shoelace area, positive for counter-clockwise polygons.
double polygon_area(std::span<const Vec2> polygon) noexcept;

/// Sutherland-Hodgman clipping of a polygon against a convex
/// counter-clockwise clip polygon.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Exact intersection-over-union of two rotated rectangles.
double rotated_bev_iou(const BevBox& a, const BevBox& b);

struct RangeCell {
  double range = 0.0;
  double intensity = 0.0;
  std::size_t index = 0;  // position of the point in the source cloud
};

/// Zenith-by-azimuth grid over a projected cloud. Rows cover the cloud's
/// observed zenith span, columns cover [-pi, pi).
class RangeImage {
 public:
  RangeImage(std::size_t rows, std::size_t cols, double zenith_min, double zenith_max);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double zenith_min() const noexcept { return zenith_min_; }
  double zenith_max() const noexcept { return zenith_max_; }

  const std::optional<RangeCell>& at(std::size_t row, std::size_t col) const;
  std::optional<RangeCell>& at(std::size_t row, std::size_t col);

  std::size_t occupied() const noexcept;

  std::size_t row_of(double zenith) const noexcept;
  std::size_t col_of(double azimuth) const noexcept;

 private:
  std::size_t rows_;
  std::size_t cols_;
  double zenith_min_;
  double zenith_max_;
  std::vector<std::optional<RangeCell>> cells_;
};

/// Bins every point by (zenith, azimuth); on collision the nearer return is
/// kept (lower index on equal range). Points without an azimuth are skipped.
RangeImage project_range_image(const PointCloud& cloud, std::size_t rows, std::size_t cols);

}  // namespace beamshift

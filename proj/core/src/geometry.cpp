#include "beamshift/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "beamshift/error.hpp"

namespace beamshift {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) noexcept {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

bool has_azimuth(const CartesianPoint& p) noexcept {
  return std::hypot(p.x, p.y) >= kMinHorizontalRadius;
}

SphericalPoint to_spherical(const CartesianPoint& p) {
  const double rho = std::hypot(p.x, p.y);
  if (!(rho >= kMinHorizontalRadius)) {
    throw Error(ErrorCode::kDegeneratePoint,
                "horizontal radius " + std::to_string(rho) + " m has no azimuth");
  }
  SphericalPoint s;
  s.zenith = std::atan2(p.z, rho);
  s.azimuth = std::atan2(p.y, p.x);
  s.range = std::sqrt(rho * rho + p.z * p.z);
  s.intensity = p.intensity;
  return s;
}

CartesianPoint to_cartesian(const SphericalPoint& s) {
  const double horizontal = s.range * std::cos(s.zenith);
  return {horizontal * std::cos(s.azimuth), horizontal * std::sin(s.azimuth),
          s.range * std::sin(s.zenith), s.intensity};
}

PointCloud filter_degenerate(const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.size());
  std::copy_if(cloud.points.begin(), cloud.points.end(), std::back_inserter(out.points),
               has_azimuth);
  return out;
}

double wrap_angle(double angle) noexcept {
  double a = std::remainder(angle, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  if (a > kPi) a = kPi;
  return a;
}

double normalize_yaw(double yaw) noexcept {
  double a = std::remainder(yaw, kTwoPi);
  if (a >= kPi) a -= kTwoPi;
  if (a < -kPi) a = -kPi;
  return a;
}

double circular_distance(double a, double b) noexcept {
  return std::abs(wrap_angle(a - b));
}

std::array<Vec2, 4> BevBox::corners() const noexcept {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  const std::array<Vec2, 4> local{{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
  std::array<Vec2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {cx + c * local[i].x - s * local[i].y, cy + s * local[i].x + c * local[i].y};
  }
  return out;
}

double polygon_area(std::span<const Vec2> polygon) noexcept {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = polygon[i];
    const Vec2& q = polygon[(i + 1) % n];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * twice;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !output.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % m];
    std::vector<Vec2> input;
    input.swap(output);
    const std::size_t n = input.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + n - 1) % n];
      const double d_cur = cross(a, b, cur);
      const double d_prev = cross(a, b, prev);
      const bool in_cur = d_cur >= 0.0;
      const bool in_prev = d_prev >= 0.0;
      if (in_cur != in_prev) {
        const double t = d_prev / (d_prev - d_cur);
        output.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
      }
      if (in_cur) output.push_back(cur);
    }
  }
  return output;
}

double rotated_bev_iou(const BevBox& a, const BevBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const auto inter_poly = clip_convex(ca, cb);
  const double inter = std::abs(polygon_area(inter_poly));
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

RangeImage::RangeImage(std::size_t rows, std::size_t cols, double zenith_min, double zenith_max)
    : rows_(rows), cols_(cols), zenith_min_(zenith_min), zenith_max_(zenith_max),
      cells_(rows * cols) {
  if (rows == 0 || cols == 0) {
    throw Error(ErrorCode::kInvalidArgument, "range image needs at least one row and column");
  }
}

const std::optional<RangeCell>& RangeImage::at(std::size_t row, std::size_t col) const {
  return cells_.at(row * cols_ + col);
}

std::optional<RangeCell>& RangeImage::at(std::size_t row, std::size_t col) {
  return cells_.at(row * cols_ + col);
}

std::size_t RangeImage::occupied() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(cells_.begin(), cells_.end(), [](const auto& c) { return c.has_value(); }));
}

std::size_t RangeImage::row_of(double zenith) const noexcept {
  const double span = zenith_max_ - zenith_min_;
  if (!(span > 0.0)) return 0;
  const double t = (zenith - zenith_min_) / span * static_cast<double>(rows_);
  if (!(t > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(t), rows_ - 1);
}

std::size_t RangeImage::col_of(double azimuth) const noexcept {
  const double t = (azimuth + kPi) / kTwoPi * static_cast<double>(cols_);
  if (!(t > 0.0)) return 0;
  auto c = static_cast<std::size_t>(t);
  // azimuth == pi is the same direction as -pi.
  if (c >= cols_) c -= cols_;
  return std::min(c, cols_ - 1);
}

RangeImage project_range_image(const PointCloud& cloud, std::size_t rows, std::size_t cols) {
  if (cloud.empty()) throw Error(ErrorCode::kEmptyCloud, "cannot project an empty cloud");
  std::vector<SphericalPoint> sph;
  std::vector<std::size_t> source;
  sph.reserve(cloud.size());
  source.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!has_azimuth(cloud.points[i])) continue;
    sph.push_back(to_spherical(cloud.points[i]));
    source.push_back(i);
  }
  if (sph.empty()) throw Error(ErrorCode::kEmptyCloud, "cloud has no projectable points");

  const auto [lo, hi] = std::minmax_element(
      sph.begin(), sph.end(), [](const auto& a, const auto& b) { return a.zenith < b.zenith; });
  RangeImage image(rows, cols, lo->zenith, hi->zenith);
  for (std::size_t k = 0; k < sph.size(); ++k) {
    auto& cell = image.at(image.row_of(sph[k].zenith), image.col_of(sph[k].azimuth));
    // Ascending index order means a strict comparison keeps the lower index on ties.
    if (!cell || sph[k].range < cell->range) {
      cell = RangeCell{sph[k].range, sph[k].intensity, source[k]};
    }
  }
  return image;
}

}  // namespace beamshift

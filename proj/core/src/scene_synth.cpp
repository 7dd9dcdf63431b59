#include "beamshift/scene_synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "beamshift/error.hpp"
#include "beamshift/random.hpp"

namespace beamshift {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Ray {
  double ox, oy, oz;
  double dx, dy, dz;
};

// Slab test in the yaw-aligned box frame. Returns the entry distance along
// the ray, if any.
std::optional<double> intersect_box(const SceneObject& obj, double ground_z, const Ray& ray) {
  const double c = std::cos(obj.box.yaw);
  const double s = std::sin(obj.box.yaw);
  const double px = ray.ox - obj.box.cx;
  const double py = ray.oy - obj.box.cy;
  const double pz = ray.oz - (ground_z + 0.5 * obj.height);
  const double o[3] = {c * px + s * py, -s * px + c * py, pz};
  const double d[3] = {c * ray.dx + s * ray.dy, -s * ray.dx + c * ray.dy, ray.dz};
  const double half[3] = {0.5 * obj.box.length, 0.5 * obj.box.width, 0.5 * obj.height};
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (std::abs(o[a]) > half[a]) return std::nullopt;
      continue;
    }
    double t1 = (-half[a] - o[a]) / d[a];
    double t2 = (half[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_near <= 0.0) return std::nullopt;  // origin inside or box behind
  return t_near;
}

}  // namespace

std::size_t ScannerSpec::azimuth_count() const {
  return static_cast<std::size_t>(std::llround(kTwoPi / azimuth_step));
}

std::vector<double> uniform_beams(std::size_t count, double zenith_min, double zenith_max) {
  if (count < 2 || !(zenith_min < zenith_max)) {
    throw Error(ErrorCode::kInvalidArgument, "uniform_beams needs count >= 2 and min < max");
  }
  std::vector<double> z(count);
  const double step = (zenith_max - zenith_min) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) z[i] = zenith_min + step * static_cast<double>(i);
  z.back() = zenith_max;
  return z;
}

std::vector<double> graded_beams(std::size_t count, double zenith_min, double zenith_max,
                                 double grade) {
  if (count < 2 || !(zenith_min < zenith_max) || !(grade > 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "graded_beams needs count >= 2, min < max and grade > 1");
  }
  // gap_k = g0 * grade^-k, k = 0 .. count-2, summing to the span.
  const double r = 1.0 / grade;
  const std::size_t gaps = count - 1;
  double total = 0.0;
  for (std::size_t k = 0; k < gaps; ++k) total += std::pow(r, static_cast<double>(k));
  const double g0 = (zenith_max - zenith_min) / total;
  std::vector<double> z(count);
  z[0] = zenith_min;
  for (std::size_t k = 0; k < gaps; ++k) {
    z[k + 1] = z[k] + g0 * std::pow(r, static_cast<double>(k));
  }
  z.back() = zenith_max;
  return z;
}

void validate(const ScannerSpec& scanner) {
  const auto& z = scanner.beam_zeniths;
  if (z.empty()) throw Error(ErrorCode::kInvalidArgument, "scanner has no beams");
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(std::abs(z[i]) < 0.5 * std::numbers::pi)) {
      throw Error(ErrorCode::kInvalidArgument, "beam zenith outside (-pi/2, pi/2)");
    }
    if (i > 0 && !(z[i] > z[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument, "beam zeniths must be strictly increasing");
    }
  }
  if (!(scanner.azimuth_step > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "azimuth step must be positive");
  }
  const double n = kTwoPi / scanner.azimuth_step;
  if (std::abs(n - std::round(n)) * scanner.azimuth_step > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "azimuth step must divide 2*pi");
  }
  if (!(scanner.max_range > 0.0) || !(scanner.noise_sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max_range must be positive, noise_sigma >= 0");
  }
}

void validate(const SceneSpec& scene) {
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    if (!(o.box.length > 0.0) || !(o.box.width > 0.0) || !(o.height > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "object " + std::to_string(i) + " has a non-positive dimension");
    }
  }
}

LabeledBox label_of(const SceneObject& object, double ground_z) {
  LabeledBox b;
  b.center = {object.box.cx, object.box.cy, ground_z + 0.5 * object.height};
  b.size = {object.box.length, object.box.width, object.height};
  b.yaw = normalize_yaw(object.box.yaw);
  b.class_id = object.class_id;
  return b;
}

RenderedScene render_scene(const ScannerSpec& scanner, const SceneSpec& scene) {
  validate(scanner);
  validate(scene);
  RenderedScene out;
  for (const auto& obj : scene.objects) out.labels.push_back(label_of(obj, scene.ground_z));

  const std::size_t n_az = scanner.azimuth_count();
  for (std::size_t b = 0; b < scanner.beam_zeniths.size(); ++b) {
    const double zen = scanner.beam_zeniths[b];
    const double cz = std::cos(zen);
    const double sz = std::sin(zen);
    for (std::size_t a = 0; a < n_az; ++a) {
      const double az = -std::numbers::pi + static_cast<double>(a) * scanner.azimuth_step;
      const Ray ray{0.0, 0.0, 0.0, cz * std::cos(az), cz * std::sin(az), sz};
      double best = std::numeric_limits<double>::infinity();
      int hit = -1;
      bool any = false;
      if (ray.dz < 0.0 && scene.ground_z < 0.0) {
        best = scene.ground_z / ray.dz;
        any = true;
      }
      for (std::size_t o = 0; o < scene.objects.size(); ++o) {
        const auto t = intersect_box(scene.objects[o], scene.ground_z, ray);
        if (t && *t < best) {
          best = *t;
          hit = static_cast<int>(o);
          any = true;
        }
      }
      if (!any || best > scanner.max_range) continue;
      const std::uint64_t ray_id = b * n_az + a;
      double range = best;
      if (scanner.noise_sigma > 0.0) {
        range += scanner.noise_sigma * counter_normal(scene.seed, streams::kRangeNoise, ray_id);
      }
      if (!(range > 0.0) || range > scanner.max_range) continue;
      const double intensity = std::clamp(1.0 / (1.0 + range / 10.0), 0.0, 1.0);
      out.cloud.points.push_back({range * ray.dx, range * ray.dy, range * ray.dz, intensity});
      out.object_ids.push_back(hit);
      out.beam.push_back(static_cast<std::uint32_t>(b));
    }
  }
  return out;
}

double box_surface_residual(const SceneObject& object, double ground_z, const CartesianPoint& p) {
  const double c = std::cos(object.box.yaw);
  const double s = std::sin(object.box.yaw);
  const double px = p.x - object.box.cx;
  const double py = p.y - object.box.cy;
  const double local[3] = {c * px + s * py, -s * px + c * py,
                           p.z - (ground_z + 0.5 * object.height)};
  const double half[3] = {0.5 * object.box.length, 0.5 * object.box.width, 0.5 * object.height};
  // Outside distance if outside, else distance to the nearest face.
  double outside = 0.0;
  double inside = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double d = std::abs(local[a]) - half[a];
    outside += d > 0.0 ? d * d : 0.0;
    inside = std::min(inside, -d);
  }
  if (outside > 0.0) return std::sqrt(outside);
  return std::max(inside, 0.0);
}

}  // namespace beamshift

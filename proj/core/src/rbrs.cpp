#include "beamshift/rbrs.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "beamshift/error.hpp"
#include "beamshift/geometry.hpp"
#include "beamshift/random.hpp"

namespace beamshift {
namespace {

const std::vector<double>& require_densities(const BeamModel& model) {
  if (model.densities.size() != model.beam_count || model.beam_count == 0) {
    throw Error(ErrorCode::kInvalidArgument, "beam model has no densities");
  }
  return model.densities;
}

void require_factor(double gamma, const char* name) {
  if (!std::isfinite(gamma) || gamma < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(name) + " must be finite and non-negative");
  }
}

}  // namespace

std::vector<double> mask_probabilities(const BeamModel& model, double gamma1) {
  require_factor(gamma1, "gamma1");
  const auto& d = require_densities(model);
  std::vector<double> eta(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) eta[j] = std::clamp(1.0 - gamma1 / d[j], 0.0, 1.0);
  return eta;
}

std::vector<double> interp_probabilities(const BeamModel& model, double gamma2) {
  if (model.beam_count < 2) throw Error(ErrorCode::kSingleBeam, "interpolation needs two beams");
  require_factor(gamma2, "gamma2");
  const auto& d = require_densities(model);
  std::vector<double> eta(d.size() - 1);
  for (std::size_t j = 0; j + 1 < d.size(); ++j) eta[j] = std::clamp(gamma2 / d[j], 0.0, 1.0);
  return eta;
}

bool beam_event(std::uint64_t seed, std::uint64_t stream, std::size_t index,
                double probability) noexcept {
  return counter_uniform(seed, stream, index) < probability;
}

std::vector<bool> masked_beams(const BeamModel& model, const DownsampleConfig& cfg,
                               std::uint64_t seed) {
  const auto eta = mask_probabilities(model, cfg.gamma1);
  std::vector<bool> out(eta.size());
  for (std::size_t j = 0; j < eta.size(); ++j) {
    out[j] = beam_event(seed, streams::kBeamMask, j, eta[j]);
  }
  return out;
}

std::vector<bool> interpolated_gaps(const BeamModel& model, const UpsampleConfig& cfg,
                                    std::uint64_t seed) {
  const auto eta = interp_probabilities(model, cfg.gamma2);
  std::vector<bool> out(eta.size());
  for (std::size_t j = 0; j < eta.size(); ++j) {
    out[j] = beam_event(seed, streams::kBeamInterp, j, eta[j]);
  }
  return out;
}

PointCloud downsample(const PointCloud& cloud, const BeamModel& model,
                      const DownsampleConfig& cfg, std::uint64_t seed) {
  if (model.assignments.size() != cloud.size()) {
    throw Error(ErrorCode::kLengthMismatch, "beam model does not cover the cloud");
  }
  const auto masked = masked_beams(model, cfg, seed);
  PointCloud out;
  out.points.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!masked[model.assignments[i]]) out.points.push_back(cloud.points[i]);
  }
  return out;
}

std::vector<CartesianPoint> interpolate_gap(const PointCloud& cloud, const BeamModel& model,
                                            std::size_t gap) {
  if (model.assignments.size() != cloud.size()) {
    throw Error(ErrorCode::kLengthMismatch, "beam model does not cover the cloud");
  }
  if (gap + 1 >= model.beam_count) {
    throw Error(ErrorCode::kInvalidArgument, "gap index " + std::to_string(gap) + " out of range");
  }
  std::vector<std::size_t> lower;
  // Upper-beam partners sorted by (azimuth, index): among equal azimuths the
  // first entry carries the lowest cloud index.
  std::vector<std::pair<double, std::size_t>> upper;
  std::vector<SphericalPoint> sph(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto beam = model.assignments[i];
    if (beam != gap && beam != gap + 1) continue;
    sph[i] = to_spherical(cloud.points[i]);
    if (beam == gap) {
      lower.push_back(i);
    } else {
      upper.emplace_back(sph[i].azimuth, i);
    }
  }
  if (lower.empty() || upper.empty()) {
    throw Error(ErrorCode::kEmptyBeam, "gap " + std::to_string(gap) + " touches an empty beam");
  }
  std::sort(upper.begin(), upper.end());
  // Keep one representative (lowest index) per distinct azimuth.
  std::vector<std::pair<double, std::size_t>> groups;
  for (const auto& u : upper) {
    if (groups.empty() || groups.back().first != u.first) groups.push_back(u);
  }

  const std::size_t g = groups.size();
  std::vector<CartesianPoint> out;
  out.reserve(lower.size());
  for (std::size_t k : lower) {
    const double az = sph[k].azimuth;
    const auto it = std::lower_bound(groups.begin(), groups.end(), az,
                                     [](const auto& e, double v) { return e.first < v; });
    const std::size_t hi = static_cast<std::size_t>(it - groups.begin()) % g;
    const std::size_t lo = (hi + g - 1) % g;
    std::size_t best = groups[hi].second;
    double best_d = circular_distance(az, groups[hi].first);
    const double d_lo = circular_distance(az, groups[lo].first);
    if (d_lo < best_d || (d_lo == best_d && groups[lo].second < best)) {
      best = groups[lo].second;
      best_d = d_lo;
    }
    const SphericalPoint& a = sph[k];
    const SphericalPoint& b = sph[best];
    SphericalPoint mid;
    mid.zenith = 0.5 * (a.zenith + b.zenith);
    mid.azimuth = wrap_angle(a.azimuth + 0.5 * wrap_angle(b.azimuth - a.azimuth));
    mid.range = 0.5 * (a.range + b.range);
    mid.intensity = 0.5 * (a.intensity + b.intensity);
    out.push_back(to_cartesian(mid));
  }
  return out;
}

PointCloud upsample(const PointCloud& cloud, const BeamModel& model, const UpsampleConfig& cfg,
                    std::uint64_t seed) {
  if (model.assignments.size() != cloud.size()) {
    throw Error(ErrorCode::kLengthMismatch, "beam model does not cover the cloud");
  }
  const auto chosen = interpolated_gaps(model, cfg, seed);
  std::vector<std::size_t> beam_sizes(model.beam_count, 0);
  for (auto b : model.assignments) ++beam_sizes[b];
  PointCloud out = cloud;
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    if (!chosen[j] || beam_sizes[j] == 0 || beam_sizes[j + 1] == 0) continue;
    auto fresh = interpolate_gap(cloud, model, j);
    out.points.insert(out.points.end(), fresh.begin(), fresh.end());
  }
  return out;
}

PointCloud apply_rbrs(const PointCloud& cloud, std::size_t beam_count, const RbrsConfig& cfg) {
  if (cfg.mode == RbrsMode::kPassthrough) return cloud;
  BeamModel model = cluster_beams(cloud, beam_count);
  beam_density(model);
  if (cfg.mode == RbrsMode::kDownsample) return downsample(cloud, model, cfg.down, cfg.seed);
  return upsample(cloud, model, cfg.up, cfg.seed);
}

}  // namespace beamshift

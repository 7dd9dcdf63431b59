#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "beamshift/beam_model.hpp"
#include "beamshift/point_cloud.hpp"

namespace beamshift {

/// Random beam re-sampling: whole-beam masking of dense scans and inter-beam
/// interpolation of sparse scans, with density-proportional probabilities.

struct DownsampleConfig {
  double gamma1 = 75.0;  // target density scale, beams/rad
};

struct UpsampleConfig {
  double gamma2 = 25.0;  // interpolation factor, beams/rad
};

enum class RbrsMode { kPassthrough, kDownsample, kUpsample };

struct RbrsConfig {
  RbrsMode mode = RbrsMode::kPassthrough;
  DownsampleConfig down;
  UpsampleConfig up;
  std::uint64_t seed = 0;
};

/// eta_j = clamp(1 - gamma1 / D(j), 0, 1) for every beam.
std::vector<double> mask_probabilities(const BeamModel& model, double gamma1);

/// eta'_j = clamp(gamma2 / D(j), 0, 1) for the gap between beams j and j+1.
std::vector<double> interp_probabilities(const BeamModel& model, double gamma2);

/// Bernoulli draw for beam (or gap) `index` under `seed`; independent of
/// every other index.
bool beam_event(std::uint64_t seed, std::uint64_t stream, std::size_t index,
                double probability) noexcept;

/// Beams dropped by downsample() for this seed.
std::vector<bool> masked_beams(const BeamModel& model, const DownsampleConfig& cfg,
                               std::uint64_t seed);

/// Gaps interpolated by upsample() for this seed.
std::vector<bool> interpolated_gaps(const BeamModel& model, const UpsampleConfig& cfg,
                                    std::uint64_t seed);

PointCloud downsample(const PointCloud& cloud, const BeamModel& model,
                      const DownsampleConfig& cfg, std::uint64_t seed);

/// One new point per point of beam `gap`, paired with the azimuth-nearest
/// point of beam `gap + 1`. Throws kEmptyBeam if either beam is empty.
std::vector<CartesianPoint> interpolate_gap(const PointCloud& cloud, const BeamModel& model,
                                            std::size_t gap);

PointCloud upsample(const PointCloud& cloud, const BeamModel& model, const UpsampleConfig& cfg,
                    std::uint64_t seed);

/// Clusters `beam_count` beams and dispatches on cfg.mode.
PointCloud apply_rbrs(const PointCloud& cloud, std::size_t beam_count, const RbrsConfig& cfg);

}  // namespace beamshift

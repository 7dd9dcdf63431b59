#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "beamshift/point_cloud.hpp"

namespace beamshift {

struct ClusterOptions {
  std::size_t max_iters = 100;
  double tol = 1e-7;  // radians of center movement
};

/// Beam layout recovered from a scan: sorted beam zenith centers, the beam
/// index of every point and the per-beam density D(j) in beams per radian.
struct BeamModel {
  std::size_t beam_count = 0;
  std::vector<double> centers;
  std::vector<std::uint32_t> assignments;
  std::vector<double> densities;  // empty until beam_density() runs
  bool converged = false;
  std::size_t iterations = 0;

  /// Indices of the points assigned to each beam, in input order.
  std::vector<std::vector<std::size_t>> members() const;
};

/// 1-D K-Means over point zeniths with deterministic quantile seeding.
/// Densities are filled in when beam_count >= 2.
BeamModel cluster_beams(const PointCloud& cloud, std::size_t beam_count,
                        const ClusterOptions& options = {});

/// Same as cluster_beams() on precomputed zenith angles.
BeamModel cluster_zeniths(std::span<const double> zeniths, std::size_t beam_count,
                          const ClusterOptions& options = {});

/// Index of the nearest center; ties go to the lower index.
std::uint32_t nearest_center(std::span<const double> sorted_centers, double zenith) noexcept;

/// D(j) = 1 / (center[j+1] - center[j]); the top beam reuses the last gap.
std::vector<double> densities_from_centers(std::span<const double> sorted_centers);

/// Computes the densities of the model, stores them and returns them.
const std::vector<double>& beam_density(BeamModel& model);

}  // namespace beamshift

#pragma once

// Synthetic scans with known beam identities, shared by unit and acceptance
// tests.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "beamshift/geometry.hpp"
#include "beamshift/object_graph.hpp"
#include "beamshift/point_cloud.hpp"

namespace fixture {

struct BeamScan {
  beamshift::PointCloud cloud;
  std::vector<std::uint32_t> beam;
};

/// `per_beam` evenly spaced azimuths per beam at a fixed range, zenith
/// jittered uniformly by +-jitter around each center.
inline BeamScan beam_scan(const std::vector<double>& centers, int per_beam, double jitter,
                          std::uint64_t seed, double range = 20.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BeamScan out;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    for (int a = 0; a < per_beam; ++a) {
      const double az = -std::numbers::pi + (a + 0.5) * 2.0 * std::numbers::pi / per_beam;
      const double zen = centers[j] + jitter * u(rng);
      out.cloud.points.push_back(beamshift::to_cartesian({zen, az, range, 0.5}));
      out.beam.push_back(static_cast<std::uint32_t>(j));
    }
  }
  return out;
}

inline std::vector<double> uniform_centers(std::size_t count, double lo, double hi) {
  std::vector<double> c(count);
  for (std::size_t j = 0; j < count; ++j) {
    c[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(count - 1);
  }
  return c;
}

/// Random prediction with yaw in (-1, 1), so pairwise yaw differences stay
/// clear of the wrap at +-pi.
template <class Rng>
beamshift::BoxPrediction random_box(Rng& rng, int channels) {
  std::uniform_real_distribution<double> pos(-15.0, 15.0), size(1.0, 4.0), yaw(-1.0, 1.0),
      feat(-1.0, 1.0), conf(0.0, 1.0);
  beamshift::BoxPrediction b;
  b.center = {pos(rng), pos(rng), 0.1 * pos(rng)};
  b.size = {size(rng), size(rng), size(rng)};
  b.yaw = yaw(rng);
  b.confidence = conf(rng);
  b.feature.resize(channels);
  for (int c = 0; c < channels; ++c) b.feature[c] = feat(rng);
  return b;
}

inline std::vector<double> box_params(const beamshift::BoxPrediction& b) {
  return {b.center.x(), b.center.y(), b.center.z(), b.size.x(), b.size.y(), b.size.z(), b.yaw};
}

inline void set_box_params(beamshift::BoxPrediction& b, const double* p) {
  b.center = {p[0], p[1], p[2]};
  b.size = {p[3], p[4], p[5]};
  b.yaw = p[6];
}

}  // namespace fixture

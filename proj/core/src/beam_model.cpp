#include "beamshift/beam_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "beamshift/error.hpp"
#include "beamshift/geometry.hpp"

namespace beamshift {

std::vector<std::vector<std::size_t>> BeamModel::members() const {
  std::vector<std::vector<std::size_t>> out(beam_count);
  for (std::size_t i = 0; i < assignments.size(); ++i) out[assignments[i]].push_back(i);
  return out;
}

std::uint32_t nearest_center(std::span<const double> sorted_centers, double zenith) noexcept {
  const auto it = std::lower_bound(sorted_centers.begin(), sorted_centers.end(), zenith);
  if (it == sorted_centers.begin()) return 0;
  const auto hi = static_cast<std::size_t>(it - sorted_centers.begin());
  if (it == sorted_centers.end()) return static_cast<std::uint32_t>(hi - 1);
  const double below = zenith - sorted_centers[hi - 1];
  const double above = sorted_centers[hi] - zenith;
  return static_cast<std::uint32_t>(above < below ? hi : hi - 1);
}

BeamModel cluster_zeniths(std::span<const double> zeniths, std::size_t beam_count,
                          const ClusterOptions& options) {
  if (beam_count == 0) throw Error(ErrorCode::kInvalidArgument, "beam count must be positive");
  std::vector<double> sorted(zeniths.begin(), zeniths.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t distinct_count = sorted.empty() ? 0 : 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) distinct_count += sorted[i] != sorted[i - 1];
  if (distinct_count < beam_count) {
    throw Error(ErrorCode::kTooFewDistinctZeniths,
                std::to_string(distinct_count) + " distinct zeniths for " +
                    std::to_string(beam_count) + " beams");
  }

  const std::size_t n = sorted.size();
  std::vector<double> centers(beam_count);
  for (std::size_t k = 0; k < beam_count; ++k) {
    centers[k] = sorted[std::min(n - 1, (2 * k + 1) * n / (2 * beam_count))];
  }

  // Lloyd iterations run over the sorted values so that sums, and therefore
  // centers, do not depend on the input order.
  BeamModel model;
  model.beam_count = beam_count;
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    std::vector<double> sorted_centers = centers;
    std::sort(sorted_centers.begin(), sorted_centers.end());
    std::vector<std::size_t> counts(beam_count, 0);
    std::vector<double> sums(beam_count, 0.0);
    for (double z : sorted) {
      const auto k = nearest_center(sorted_centers, z);
      ++counts[k];
      sums[k] += z;
    }
    std::vector<double> next(beam_count);
    for (std::size_t k = 0; k < beam_count; ++k) {
      next[k] = counts[k] > 0 ? sums[k] / static_cast<double>(counts[k]) : sorted_centers[k];
    }
    // Empty clusters (possible with duplicate seeds) are reseeded at the value
    // farthest from its current center.
    for (std::size_t k = 0; k < beam_count; ++k) {
      if (counts[k] > 0) continue;
      double worst = -1.0;
      double pick = next[k];
      for (double z : sorted) {
        const double d = std::abs(z - next[nearest_center(next, z)]);
        if (d > worst && std::find(next.begin(), next.end(), z) == next.end()) {
          worst = d;
          pick = z;
        }
      }
      next[k] = pick;
      std::sort(next.begin(), next.end());
    }
    std::sort(next.begin(), next.end());
    double moved = 0.0;
    for (std::size_t k = 0; k < beam_count; ++k) {
      moved = std::max(moved, std::abs(next[k] - sorted_centers[k]));
    }
    centers = std::move(next);
    model.iterations = iter + 1;
    if (moved < options.tol) {
      model.converged = true;
      break;
    }
  }
  std::sort(centers.begin(), centers.end());
  model.centers = centers;
  model.assignments.resize(zeniths.size());
  for (std::size_t i = 0; i < zeniths.size(); ++i) {
    model.assignments[i] = nearest_center(model.centers, zeniths[i]);
  }
  if (beam_count >= 2) {
    for (std::size_t k = 1; k < beam_count; ++k) {
      if (!(model.centers[k] > model.centers[k - 1])) {
        throw Error(ErrorCode::kTooFewDistinctZeniths, "clustering produced coincident centers");
      }
    }
    model.densities = densities_from_centers(model.centers);
  }
  return model;
}

BeamModel cluster_beams(const PointCloud& cloud, std::size_t beam_count,
                        const ClusterOptions& options) {
  std::vector<double> zeniths;
  zeniths.reserve(cloud.size());
  for (const auto& p : cloud.points) zeniths.push_back(to_spherical(p).zenith);
  return cluster_zeniths(zeniths, beam_count, options);
}

std::vector<double> densities_from_centers(std::span<const double> sorted_centers) {
  const std::size_t m = sorted_centers.size();
  if (m < 2) throw Error(ErrorCode::kSingleBeam, "beam density needs at least two beams");
  std::vector<double> d(m);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const double gap = sorted_centers[j + 1] - sorted_centers[j];
    if (!(gap > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "beam centers must be strictly increasing");
    }
    d[j] = 1.0 / gap;
  }
  d[m - 1] = d[m - 2];
  return d;
}

const std::vector<double>& beam_density(BeamModel& model) {
  if (model.beam_count < 2) {
    throw Error(ErrorCode::kSingleBeam, "beam density needs at least two beams");
  }
  model.densities = densities_from_centers(model.centers);
  return model.densities;
}

}  // namespace beamshift

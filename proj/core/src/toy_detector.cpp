#include "beamshift/toy_detector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>

#include "beamshift/error.hpp"
#include "beamshift/geometry.hpp"

namespace beamshift {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

std::int64_t cell_key(std::int64_t x, std::int64_t y, std::int64_t z) {
  constexpr std::int64_t kBias = 1 << 20;
  return ((x + kBias) << 42) | ((y + kBias) << 21) | (z + kBias);
}

double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

std::array<Eigen::Vector2d, 2> completion_axes(const ClusterSummary& c) {
  const Eigen::Vector2d u(std::cos(c.yaw), std::sin(c.yaw));
  const Eigen::Vector2d v(-u.y(), u.x());
  return {c.rect_center.dot(u) < 0.0 ? Eigen::Vector2d(-u) : u,
          c.rect_center.dot(v) < 0.0 ? Eigen::Vector2d(-v) : v};
}

namespace {

double half_turn_yaw(double yaw) {
  // Rectangle headings are defined modulo pi.
  double a = normalize_yaw(yaw);
  if (a >= 0.5 * std::numbers::pi) a -= std::numbers::pi;
  if (a < -0.5 * std::numbers::pi) a += std::numbers::pi;
  return a;
}

}  // namespace

std::vector<std::vector<std::size_t>> connected_components(std::span<const Eigen::Vector3d> points,
                                                           double threshold) {
  if (!(threshold > 0.0)) throw Error(ErrorCode::kInvalidArgument, "threshold must be positive");
  const std::size_t n = points.size();
  std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
  std::vector<std::array<std::int64_t, 3>> cells(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      cells[i][a] = static_cast<std::int64_t>(std::floor(points[i][a] / threshold));
    }
    grid[cell_key(cells[i][0], cells[i][1], cells[i][2])].push_back(i);
  }
  DisjointSets sets(n);
  const double t2 = threshold * threshold;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find(cell_key(cells[i][0] + dx, cells[i][1] + dy, cells[i][2] + dz));
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j > i && (points[i] - points[j]).squaredNorm() <= t2) sets.unite(i, j);
          }
        }
      }
    }
  }
  std::vector<std::vector<std::size_t>> out;
  std::unordered_map<std::size_t, std::size_t> label;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = sets.find(i);
    auto [it, fresh] = label.try_emplace(root, out.size());
    if (fresh) out.emplace_back();
    out[it->second].push_back(i);
  }
  return out;
}

BevRectangle min_area_rectangle(std::span<const Eigen::Vector2d> points) {
  BevRectangle rect;
  if (points.empty()) return rect;
  const auto hull = convex_hull(std::vector<Eigen::Vector2d>(points.begin(), points.end()));
  if (hull.size() == 1) {
    rect.center = hull[0];
    return rect;
  }
  double best_area = std::numeric_limits<double>::infinity();
  const std::size_t edges = hull.size() == 2 ? 1 : hull.size();
  for (std::size_t e = 0; e < edges; ++e) {
    const Eigen::Vector2d edge = hull[(e + 1) % hull.size()] - hull[e];
    const double len = edge.norm();
    if (!(len > 0.0)) continue;
    const Eigen::Vector2d u = edge / len;
    const Eigen::Vector2d v(-u.y(), u.x());
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& p : hull) {
      const double pu = p.dot(u);
      const double pv = p.dot(v);
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      vmin = std::min(vmin, pv);
      vmax = std::max(vmax, pv);
    }
    const double area = (umax - umin) * (vmax - vmin);
    if (area < best_area) {
      best_area = area;
      rect.center = 0.5 * (umin + umax) * u + 0.5 * (vmin + vmax) * v;
      const double du = umax - umin;
      const double dv = vmax - vmin;
      if (du >= dv) {
        rect.length = du;
        rect.width = dv;
        rect.yaw = half_turn_yaw(std::atan2(u.y(), u.x()));
      } else {
        rect.length = dv;
        rect.width = du;
        rect.yaw = half_turn_yaw(std::atan2(v.y(), v.x()));
      }
    }
  }
  return rect;
}

ToyDetector::ToyDetector(ToyDetectorConfig config) : config_(std::move(config)) {
  if (config_.class_templates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "toy detector needs at least one class template");
  }
  if (!(config_.confidence_points > 0.0) || !(config_.feature_scale > 0.0) ||
      !(config_.reliability_points > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "toy detector scales must be positive");
  }
}

std::size_t ToyDetector::parameter_count() const { return kPrior + 3 * class_count(); }

DetectorParams ToyDetector::initial_params() const {
  DetectorParams p;
  p.theta.assign(parameter_count(), 0.0);
  for (std::size_t k = 0; k < class_count(); ++k) {
    for (std::size_t d = 0; d < 3; ++d) {
      p.theta[kPrior + 3 * k + d] = config_.class_templates[k][static_cast<Eigen::Index>(d)];
    }
  }
  return p;
}

void ToyDetector::check_params(const DetectorParams& params) const {
  if (params.size() != parameter_count()) {
    throw Error(ErrorCode::kLengthMismatch, "expected " + std::to_string(parameter_count()) +
                                                " parameters, got " +
                                                std::to_string(params.size()));
  }
}

const ToyObservation& ToyDetector::cast(const Observation& obs) const {
  const auto* toy = dynamic_cast<const ToyObservation*>(&obs);
  if (toy == nullptr) throw Error(ErrorCode::kInvalidArgument, "observation not made by ToyDetector");
  return *toy;
}

ToyObservation ToyDetector::summarize(const PointCloud& cloud) const {
  std::vector<Eigen::Vector3d> kept;
  std::vector<std::size_t> source;
  const double floor_z = config_.ground_z + config_.ground_margin;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    if (p.z < floor_z || !has_azimuth(p)) continue;
    kept.emplace_back(p.x, p.y, p.z);
    source.push_back(i);
  }
  ToyObservation obs;
  for (const auto& component : connected_components(kept, config_.cluster_distance)) {
    if (component.size() < config_.min_cluster_points) continue;
    ClusterSummary c;
    c.points = component.size();
    std::vector<Eigen::Vector2d> bev;
    std::vector<double> zeniths;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t idx : component) {
      const auto& p = kept[idx];
      c.centroid += p;
      bev.emplace_back(p.x(), p.y());
      zeniths.push_back(std::atan2(p.z(), std::hypot(p.x(), p.y())));
      top = std::max(top, p.z());
      c.members.push_back(source[idx]);
    }
    c.centroid /= static_cast<double>(component.size());
    const BevRectangle rect = min_area_rectangle(bev);
    c.rect_center = rect.center;
    const double top_h = top - config_.ground_z;

    // A face is either seen whole or not at all, so each rectangle side is
    // close to a template side or close to zero. Pick the class and the
    // length axis that fit best.
    auto side_cost = [](double extent, double side) {
      const double miss = std::min(std::abs(extent - side), extent);
      return miss * miss;
    };
    double best = std::numeric_limits<double>::infinity();
    bool swap_axes = false;
    for (std::size_t k = 0; k < class_count(); ++k) {
      const auto& t = config_.class_templates[k];
      const double keep = side_cost(rect.length, t.x()) + side_cost(rect.width, t.y());
      const double swap = side_cost(rect.width, t.x()) + side_cost(rect.length, t.y());
      if (keep < best) {
        best = keep;
        swap_axes = false;
        c.class_id = static_cast<int>(k);
      }
      if (swap < best) {
        best = swap;
        swap_axes = true;
        c.class_id = static_cast<int>(k);
      }
    }
    if (swap_axes) {
      c.yaw = half_turn_yaw(rect.yaw + 0.5 * std::numbers::pi);
      c.extent = {rect.width, rect.length, top_h};
    } else {
      c.yaw = rect.yaw;
      c.extent = {rect.length, rect.width, top_h};
    }
    const auto& t = config_.class_templates[static_cast<std::size_t>(c.class_id)];
    c.observed = {c.extent.x() >= 0.5 * t.x() ? 1.0 : 0.0, c.extent.y() >= 0.5 * t.y() ? 1.0 : 0.0,
                  1.0};

    std::sort(zeniths.begin(), zeniths.end());
    c.rows = 1;
    for (std::size_t i = 1; i < zeniths.size(); ++i) {
      if (zeniths[i] - zeniths[i - 1] > config_.row_gap) ++c.rows;
    }
    const double horizontal = std::hypot(c.centroid.x(), c.centroid.y());
    c.row_spacing = c.rows > 1 ? horizontal * (zeniths.back() - zeniths.front()) /
                                     static_cast<double>(c.rows - 1)
                               : 0.0;
    const double n = static_cast<double>(c.points);
    c.reliability = n / (n + config_.reliability_points);
    obs.clusters.push_back(std::move(c));
  }
  return obs;
}

std::unique_ptr<Observation> ToyDetector::observe(const PointCloud& cloud) const {
  return std::make_unique<ToyObservation>(summarize(cloud));
}

BoxPrediction ToyDetector::predict_one(const ClusterSummary& c, const DetectorParams& params) const {
  const auto& th = params.theta;
  BoxPrediction b;
  const std::size_t prior = kPrior + 3 * static_cast<std::size_t>(c.class_id);
  for (std::size_t d = 0; d < 3; ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    const double r = c.reliability * c.observed[i];
    b.size[i] = r * (c.extent[i] + th[kGain + d] * c.row_spacing) + (1.0 - r) * th[prior + d];
  }
  // The visible faces are the near ones: grow the box away from the sensor.
  const auto axes = completion_axes(c);
  Eigen::Vector2d xy = c.rect_center + Eigen::Vector2d(th[kOffset], th[kOffset + 1]);
  xy += 0.5 * (b.size.x() - c.extent.x()) * axes[0] + 0.5 * (b.size.y() - c.extent.y()) * axes[1];
  b.center = {xy.x(), xy.y(), config_.ground_z + 0.5 * b.size.z() + th[kOffset + 2]};
  b.yaw = c.yaw;
  b.class_id = c.class_id;
  const double n = static_cast<double>(c.points);
  b.confidence = n / (n + config_.confidence_points);
  b.feature.resize(kFeatureWidth);
  b.feature.head<3>() = b.center / config_.feature_scale;
  b.feature.segment<3>(3) = b.size;
  b.feature[6] = std::sin(b.yaw);
  b.feature[7] = std::cos(b.yaw);
  b.feature[8] = b.confidence;
  return b;
}

std::vector<BoxPrediction> ToyDetector::predict(const Observation& obs,
                                                const DetectorParams& params) const {
  check_params(params);
  const auto& toy = cast(obs);
  std::vector<BoxPrediction> out;
  out.reserve(toy.clusters.size());
  for (const auto& c : toy.clusters) out.push_back(predict_one(c, params));
  return out;
}

LossAndGradient ToyDetector::det_loss_and_grad(const Observation& obs, const DetectorParams& params,
                                               std::span<const LabeledBox> labels) const {
  const auto preds = predict(obs, params);
  std::vector<BoxPrediction> targets;
  targets.reserve(labels.size());
  for (const auto& l : labels) {
    BoxPrediction t;
    t.center = l.center;
    t.size = l.size;
    t.yaw = l.yaw;
    t.class_id = l.class_id;
    targets.push_back(std::move(t));
  }
  const auto matches = match_boxes(targets, preds, config_.match);
  LossAndGradient out;
  out.gradient.assign(parameter_count(), 0.0);
  out.matched = matches.size();
  if (matches.empty()) return out;
  const double inv_p = 1.0 / static_cast<double>(matches.size());
  std::vector<PredictionGradient> grads;
  grads.reserve(matches.size());
  for (const auto& m : matches) {
    const auto& p = preds[m.student];
    const auto& t = targets[m.teacher];
    const Eigen::Vector3d dc = p.center - t.center;
    const Eigen::Vector3d db = p.size - t.size;
    out.value += inv_p * (dc.squaredNorm() + db.squaredNorm());
    PredictionGradient g;
    g.prediction = m.student;
    g.feature = Eigen::VectorXd::Zero(kFeatureWidth);
    g.box.head<3>() = 2.0 * inv_p * dc;
    g.box.segment<3>(3) = 2.0 * inv_p * db;
    grads.push_back(std::move(g));
  }
  out.gradient = backprop(obs, params, grads);
  return out;
}

std::vector<double> ToyDetector::backprop(const Observation& obs, const DetectorParams& params,
                                          std::span<const PredictionGradient> grads) const {
  check_params(params);
  const auto& toy = cast(obs);
  std::vector<double> g(parameter_count(), 0.0);
  for (const auto& pg : grads) {
    if (pg.prediction >= toy.clusters.size()) {
      throw Error(ErrorCode::kInvalidArgument, "gradient refers to an unknown prediction");
    }
    if (pg.feature.size() != 0 && pg.feature.size() != kFeatureWidth) {
      throw Error(ErrorCode::kDimensionMismatch, "feature gradient has the wrong width");
    }
    const auto& c = toy.clusters[pg.prediction];
    Eigen::Vector3d d_center = pg.box.head<3>();
    Eigen::Vector3d d_size = pg.box.segment<3>(3);
    if (pg.feature.size() == kFeatureWidth) {
      d_center += pg.feature.head<3>() / config_.feature_scale;
      d_size += pg.feature.segment<3>(3);
    }
    const auto axes = completion_axes(c);
    d_size.x() += 0.5 * d_center.head<2>().dot(axes[0]);
    d_size.y() += 0.5 * d_center.head<2>().dot(axes[1]);
    d_size.z() += 0.5 * d_center.z();
    const std::size_t prior = kPrior + 3 * static_cast<std::size_t>(c.class_id);
    for (std::size_t d = 0; d < 3; ++d) {
      const auto i = static_cast<Eigen::Index>(d);
      g[kOffset + d] += d_center[i];
      const double r = c.reliability * c.observed[i];
      g[kGain + d] += d_size[i] * r * c.row_spacing;
      g[prior + d] += d_size[i] * (1.0 - r);
    }
  }
  return g;
}

}  // namespace beamshift

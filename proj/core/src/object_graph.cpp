#include "beamshift/object_graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "beamshift/error.hpp"

namespace beamshift {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kDimensionMismatch, what);
}

double squared_kernel_argument(const BoxPrediction& a, const BoxPrediction& b,
                               const GraphConfig& cfg) {
  const double dyaw = yaw_difference(a.yaw, b.yaw, cfg);
  return (a.center - b.center).squaredNorm() + cfg.eps1 * (a.size - b.size).squaredNorm() +
         cfg.eps2 * dyaw * dyaw;
}

}  // namespace

double yaw_difference(double a, double b, const GraphConfig& cfg) noexcept {
  return cfg.wrap_yaw ? wrap_angle(a - b) : a - b;
}

double edge_weight(const BoxPrediction& a, const BoxPrediction& b, const GraphConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tau must be positive");
  return std::exp(-squared_kernel_argument(a, b, cfg) / (cfg.tau * cfg.tau));
}

BoxGradient edge_weight_gradient(const BoxPrediction& a, const BoxPrediction& b,
                                 const GraphConfig& cfg) {
  const double w = edge_weight(a, b, cfg);
  const double scale = -2.0 * w / (cfg.tau * cfg.tau);
  BoxGradient g;
  g.head<3>() = scale * (a.center - b.center);
  g.segment<3>(3) = scale * cfg.eps1 * (a.size - b.size);
  g(6) = scale * cfg.eps2 * yaw_difference(a.yaw, b.yaw, cfg);
  return g;
}

ObjectGraph graph_over(std::span<const BoxPrediction> nodes, const GraphConfig& cfg) {
  ObjectGraph g;
  g.config = cfg;
  g.nodes.assign(nodes.begin(), nodes.end());
  g.source_index.resize(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) g.source_index[i] = i;
  const auto n = static_cast<Eigen::Index>(nodes.size());
  g.weights = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double w = edge_weight(g.nodes[i], g.nodes[j], cfg);
      g.weights(i, j) = w;
      g.weights(j, i) = w;
    }
  }
  return g;
}

ObjectGraph build_graph(std::span<const BoxPrediction> predictions, const GraphConfig& cfg) {
  std::vector<BoxPrediction> kept;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].confidence > cfg.node_conf_threshold) {
      kept.push_back(predictions[i]);
      index.push_back(i);
    }
  }
  ObjectGraph g = graph_over(kept, cfg);
  g.source_index = std::move(index);
  return g;
}

std::vector<NodeMatch> match_boxes(std::span<const BoxPrediction> teacher,
                                   std::span<const BoxPrediction> student, const MatchConfig& cfg) {
  std::vector<NodeMatch> candidates;
  for (std::size_t t = 0; t < teacher.size(); ++t) {
    const BevBox tb = teacher[t].bev();
    for (std::size_t s = 0; s < student.size(); ++s) {
      const double iou = rotated_bev_iou(tb, student[s].bev());
      if (iou > cfg.iou_th) candidates.push_back({t, s, iou});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const NodeMatch& a, const NodeMatch& b) {
    return std::tie(b.iou, a.teacher, a.student) < std::tie(a.iou, b.teacher, b.student);
  });
  std::vector<bool> used_t(teacher.size(), false);
  std::vector<bool> used_s(student.size(), false);
  std::vector<NodeMatch> out;
  for (const auto& c : candidates) {
    if (used_t[c.teacher] || used_s[c.student]) continue;
    used_t[c.teacher] = true;
    used_s[c.student] = true;
    out.push_back(c);
  }
  return out;
}

std::vector<NodeMatch> match_nodes(const ObjectGraph& teacher, const ObjectGraph& student,
                                   const MatchConfig& cfg) {
  return match_boxes(teacher.nodes, student.nodes, cfg);
}

NodeLoss node_consistency_loss(const Eigen::MatrixXd& student_features,
                               const Eigen::MatrixXd& teacher_features) {
  require(student_features.rows() == teacher_features.rows() &&
              student_features.cols() == teacher_features.cols(),
          "student and teacher feature matrices differ in shape");
  const Eigen::Index n = student_features.rows();
  NodeLoss out;
  out.grad = Eigen::MatrixXd::Zero(n, student_features.cols());
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto fs = student_features.row(i);
    const auto ft = teacher_features.row(i);
    const double ns = fs.norm();
    const double nt = ft.norm();
    if (!(ns > 0.0) || !(nt > 0.0)) {
      throw Error(ErrorCode::kZeroNormFeature, "feature row " + std::to_string(i) + " has zero norm");
    }
    const double cosine = fs.dot(ft) / (ns * nt);
    const double term = std::exp(-cosine);
    out.value += term;
    // d cos / d fs = ft / (|fs||ft|) - cos * fs / |fs|^2
    out.grad.row(i) = -term * inv_n * (ft / (ns * nt) - cosine * fs / (ns * ns));
  }
  out.value *= inv_n;
  return out;
}

Eigen::MatrixXd laplacian(const Eigen::MatrixXd& weights) {
  require(weights.rows() == weights.cols(), "weight matrix must be square");
  Eigen::MatrixXd l = -weights;
  l.diagonal() = weights.rowwise().sum();
  l.diagonal() -= weights.diagonal();
  // Self-loops cancel in D - W.
  return l;
}

double glr(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& features) {
  require(weights.rows() == weights.cols(), "weight matrix must be square");
  require(weights.rows() == features.rows(), "weight matrix and features disagree on node count");
  if (features.rows() == 0) return 0.0;
  return (features.transpose() * laplacian(weights) * features).trace();
}

EdgeLoss edge_consistency_loss(const ObjectGraph& student, const ObjectGraph& teacher,
                               const Eigen::MatrixXd& student_features,
                               const Eigen::MatrixXd& teacher_features,
                               const ConsistencyConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(student.size());
  require(static_cast<Eigen::Index>(teacher.size()) == n, "graphs differ in node count");
  require(student_features.rows() == n && teacher_features.rows() == n,
          "feature rows do not match graph size");
  require(student_features.cols() == teacher_features.cols(), "feature widths differ");
  require(student.weights.rows() == n && student.weights.cols() == n &&
              teacher.weights.rows() == n && teacher.weights.cols() == n,
          "weight matrices do not match graph size");

  EdgeLoss out;
  out.grad_features = Eigen::MatrixXd::Zero(n, student_features.cols());
  out.grad_boxes = Eigen::MatrixXd::Zero(n, kBoxParams);
  if (n <= 1) return out;

  const double inv_n2 = 1.0 / static_cast<double>(n * n);
  const Eigen::MatrixXd diff = student.weights - teacher.weights;
  out.weight_alignment = diff.squaredNorm();
  const Eigen::MatrixXd lap_s = laplacian(student.weights);
  out.glr_student = (student_features.transpose() * lap_s * student_features).trace();
  out.glr_teacher = glr(teacher.weights, teacher_features);
  out.value = inv_n2 * (cfg.gamma * out.weight_alignment +
                        (1.0 - cfg.gamma) * (out.glr_student - out.glr_teacher));

  out.grad_features = inv_n2 * (1.0 - cfg.gamma) * 2.0 * lap_s * student_features;

  // Each unordered pair is one variable w_ij appearing twice in |W_T - W_S|^2
  // and once in the pairwise form of GLR_S.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d_w =
          inv_n2 * (cfg.gamma * 4.0 * diff(i, j) +
                    (1.0 - cfg.gamma) *
                        (student_features.row(i) - student_features.row(j)).squaredNorm());
      const BoxGradient g = edge_weight_gradient(student.nodes[i], student.nodes[j], student.config);
      out.grad_boxes.row(i) += d_w * g.transpose();
      out.grad_boxes.row(j) -= d_w * g.transpose();
    }
  }
  return out;
}

ConsistencyLoss consistency_loss(const ObjectGraph& student, const ObjectGraph& teacher,
                                 const Eigen::MatrixXd& student_features,
                                 const Eigen::MatrixXd& teacher_features,
                                 const ConsistencyConfig& cfg) {
  const NodeLoss node = node_consistency_loss(student_features, teacher_features);
  const EdgeLoss edge =
      edge_consistency_loss(student, teacher, student_features, teacher_features, cfg);
  ConsistencyLoss out;
  out.node = node.value;
  out.edge = edge.value;
  out.total = cfg.beta1 * node.value + cfg.beta2 * edge.value;
  out.grad_features = cfg.beta1 * node.grad + cfg.beta2 * edge.grad_features;
  out.grad_boxes = cfg.beta2 * edge.grad_boxes;
  return out;
}

Eigen::MatrixXd stack_features(std::span<const BoxPrediction> boxes) {
  if (boxes.empty()) return Eigen::MatrixXd(0, 0);
  const Eigen::Index c = boxes.front().feature.size();
  Eigen::MatrixXd f(static_cast<Eigen::Index>(boxes.size()), c);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    require(boxes[i].feature.size() == c, "feature length differs across predictions");
    f.row(static_cast<Eigen::Index>(i)) = boxes[i].feature.transpose();
  }
  return f;
}

BranchConsistency evaluate_consistency(std::span<const BoxPrediction> teacher,
                                       std::span<const BoxPrediction> student,
                                       const GraphConfig& graph_cfg, const MatchConfig& match_cfg,
                                       const ConsistencyConfig& cons_cfg) {
  BranchConsistency out;
  const ObjectGraph tg = build_graph(teacher, graph_cfg);
  const ObjectGraph sg = build_graph(student, graph_cfg);
  out.matches = match_nodes(tg, sg, match_cfg);

  std::vector<BoxPrediction> t_nodes;
  std::vector<BoxPrediction> s_nodes;
  for (const auto& m : out.matches) {
    t_nodes.push_back(tg.nodes[m.teacher]);
    s_nodes.push_back(sg.nodes[m.student]);
    out.teacher_index.push_back(tg.source_index[m.teacher]);
    out.student_index.push_back(sg.source_index[m.student]);
  }
  Eigen::MatrixXd ft = stack_features(t_nodes);
  Eigen::MatrixXd fs = stack_features(s_nodes);
  if (!t_nodes.empty()) {
    require(ft.cols() == fs.cols(), "teacher and student feature widths differ");
  }
  const ObjectGraph t_matched = graph_over(t_nodes, graph_cfg);
  const ObjectGraph s_matched = graph_over(s_nodes, graph_cfg);
  out.node_detail = node_consistency_loss(fs, ft);
  out.edge_detail = edge_consistency_loss(s_matched, t_matched, fs, ft, cons_cfg);
  out.loss.node = out.node_detail.value;
  out.loss.edge = out.edge_detail.value;
  out.loss.total = cons_cfg.beta1 * out.loss.node + cons_cfg.beta2 * out.loss.edge;
  out.loss.grad_features = cons_cfg.beta1 * out.node_detail.grad +
                           cons_cfg.beta2 * out.edge_detail.grad_features;
  out.loss.grad_boxes = cons_cfg.beta2 * out.edge_detail.grad_boxes;
  return out;
}

}  // namespace beamshift

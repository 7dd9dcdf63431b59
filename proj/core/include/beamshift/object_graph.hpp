#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "beamshift/geometry.hpp"

namespace beamshift {

/// Box parameters in gradient layout: cx, cy, cz, l, w, h, yaw.
inline constexpr Eigen::Index kBoxParams = 7;
using BoxGradient = Eigen::Matrix<double, kBoxParams, 1>;

/// 7-DOF detection with class, confidence and a C-channel feature vector.
struct BoxPrediction {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  double yaw = 0.0;
  int class_id = 0;
  double confidence = 1.0;
  Eigen::VectorXd feature;

  BevBox bev() const noexcept { return {center.x(), center.y(), size.x(), size.y(), yaw}; }
};

struct GraphConfig {
  double eps1 = 5.0;   // size term weight
  double eps2 = 20.0;  // yaw term weight
  double tau = 13.0;   // temperature, meters
  double node_conf_threshold = 0.5;
  // Wrap yaw differences into (-pi, pi] before squaring. Turning this off
  // uses the raw difference.
  bool wrap_yaw = true;
};

struct MatchConfig {
  double iou_th = 0.1;
};

struct ConsistencyConfig {
  double beta1 = 0.05;  // node-level weight
  double beta2 = 0.3;   // edge-level weight
  double gamma = 0.5;   // edge-weight alignment vs. GLR difference
};

/// Fully connected graph over detections. weights is symmetric with a zero
/// diagonal; source_index maps each node back to the prediction list it was
/// built from.
struct ObjectGraph {
  std::vector<BoxPrediction> nodes;
  std::vector<std::size_t> source_index;
  Eigen::MatrixXd weights;
  GraphConfig config;

  std::size_t size() const noexcept { return nodes.size(); }
};

/// Yaw difference as used by the edge kernel.
double yaw_difference(double a, double b, const GraphConfig& cfg) noexcept;

/// w = exp(-(|dc|^2 + eps1 |db|^2 + eps2 dyaw^2) / tau^2).
double edge_weight(const BoxPrediction& a, const BoxPrediction& b, const GraphConfig& cfg);

/// d w(a, b) / d(box parameters of a). The gradient with respect to b is the
/// negation.
BoxGradient edge_weight_gradient(const BoxPrediction& a, const BoxPrediction& b,
                                 const GraphConfig& cfg);

/// Graph over predictions with confidence strictly above the node threshold.
ObjectGraph build_graph(std::span<const BoxPrediction> predictions, const GraphConfig& cfg);

/// Graph over every given box, without confidence filtering.
ObjectGraph graph_over(std::span<const BoxPrediction> nodes, const GraphConfig& cfg);

struct NodeMatch {
  std::size_t teacher = 0;
  std::size_t student = 0;
  double iou = 0.0;
};

/// Greedy one-to-one matching on rotated BEV IoU, accepted in descending IoU
/// order while IoU > iou_th. Ties resolve by (teacher, student) index.
std::vector<NodeMatch> match_boxes(std::span<const BoxPrediction> teacher,
                                   std::span<const BoxPrediction> student, const MatchConfig& cfg);

/// match_boxes() over graph nodes; indices are node positions in each graph.
std::vector<NodeMatch> match_nodes(const ObjectGraph& teacher, const ObjectGraph& student,
                                   const MatchConfig& cfg);

struct NodeLoss {
  double value = 0.0;
  Eigen::MatrixXd grad;  // d value / d student features, N x C
};

/// (1/N) sum_i exp(-cos(f_i^S, f_i^T)) over matched rows.
NodeLoss node_consistency_loss(const Eigen::MatrixXd& student_features,
                               const Eigen::MatrixXd& teacher_features);

/// L = D - W.
Eigen::MatrixXd laplacian(const Eigen::MatrixXd& weights);

/// tr(F^T (D - W) F).
double glr(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& features);

struct EdgeLoss {
  double value = 0.0;
  double weight_alignment = 0.0;  // |W_T - W_S|_F^2
  double glr_student = 0.0;
  double glr_teacher = 0.0;
  Eigen::MatrixXd grad_features;  // N x C
  Eigen::MatrixXd grad_boxes;     // N x 7, student box parameters
};

/// (1/N^2) (gamma |W_T - W_S|^2 + (1 - gamma) (GLR_S - GLR_T)). Both graphs
/// must be built over the same matched node order. Teacher terms carry no
/// gradient.
EdgeLoss edge_consistency_loss(const ObjectGraph& student, const ObjectGraph& teacher,
                               const Eigen::MatrixXd& student_features,
                               const Eigen::MatrixXd& teacher_features,
                               const ConsistencyConfig& cfg);

struct ConsistencyLoss {
  double node = 0.0;
  double edge = 0.0;
  double total = 0.0;  // beta1 * node + beta2 * edge
  Eigen::MatrixXd grad_features;
  Eigen::MatrixXd grad_boxes;
};

ConsistencyLoss consistency_loss(const ObjectGraph& student, const ObjectGraph& teacher,
                                 const Eigen::MatrixXd& student_features,
                                 const Eigen::MatrixXd& teacher_features,
                                 const ConsistencyConfig& cfg);

/// Full cross-branch evaluation on raw prediction lists: confidence-filtered
/// graphs, node matching, graphs rebuilt over the matched pairs and the
/// joint loss. Gradient rows follow `matches`; student_index / teacher_index
/// map them back to the input lists.
struct BranchConsistency {
  std::vector<NodeMatch> matches;  // indices are graph node positions
  std::vector<std::size_t> teacher_index;
  std::vector<std::size_t> student_index;
  EdgeLoss edge_detail;
  NodeLoss node_detail;
  ConsistencyLoss loss;
};

BranchConsistency evaluate_consistency(std::span<const BoxPrediction> teacher,
                                       std::span<const BoxPrediction> student,
                                       const GraphConfig& graph_cfg, const MatchConfig& match_cfg,
                                       const ConsistencyConfig& cons_cfg);

/// Stacks feature vectors as rows. All features must share one length.
Eigen::MatrixXd stack_features(std::span<const BoxPrediction> boxes);

}  // namespace beamshift

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "beamshift/beam_model.hpp"
#include "beamshift/pipeline.hpp"
#include "beamshift/point_cloud.hpp"
#include "beamshift/scene_synth.hpp"

namespace beamshift {

// Point clouds: little-endian float32 quadruples [x, y, z, intensity].
std::string encode_bin(const PointCloud& cloud);
PointCloud decode_bin(std::string_view bytes);
PointCloud read_bin(const std::filesystem::path& path);
void write_bin(const PointCloud& cloud, const std::filesystem::path& path);

// Labels: JSON array of {cx, cy, cz, l, w, h, yaw, class_id, confidence?}.
std::string encode_labels(std::span<const LabeledBox> labels);
std::vector<LabeledBox> decode_labels(std::string_view text);
std::vector<LabeledBox> read_labels(const std::filesystem::path& path);
void write_labels(std::span<const LabeledBox> labels, const std::filesystem::path& path);

// Per-beam density table with header beam_index,zenith_rad,density_per_rad.
std::string density_csv(const BeamModel& model);
void emit_density_csv(const BeamModel& model, const std::filesystem::path& path);

struct DensityRow {
  std::size_t beam_index = 0;
  double zenith = 0.0;
  double density = 0.0;
};
std::vector<DensityRow> parse_density_csv(std::string_view text);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

// Scanner: {beam_zeniths: [...]} or {beams: {kind: uniform|graded, count,
// zenith_min, zenith_max, grade?}}, plus azimuth_step, max_range?, noise_sigma?.
// Angles in radians.
ScannerSpec decode_scanner(std::string_view text);
std::string encode_scanner(const ScannerSpec& scanner);

// Scene: {ground_z?, seed?, objects: [{cx, cy, l, w, yaw, h, class_id?}]}.
SceneSpec decode_scene(std::string_view text);
std::string encode_scene(const SceneSpec& scene);

/// Feature rows aligned with the teacher and student label files.
struct FeatureSets {
  Eigen::MatrixXd teacher;
  Eigen::MatrixXd student;
};
FeatureSets decode_features(std::string_view text);

std::string encode_config(const PipelineConfig& cfg);
/// Overlays the keys present in `text` onto `base`. Unknown keys and a
/// version other than kVersion are schema violations.
PipelineConfig decode_config(std::string_view text, const PipelineConfig& base = {});

std::string encode_report(const SelfTrainOutcome& outcome);
/// One row per self-training epoch plus the epoch-0 pre-trained row.
std::string curves_csv(const SelfTrainOutcome& outcome);

struct Dataset {
  std::vector<std::string> names;  // file stems, sorted
  std::vector<PointCloud> clouds;
  std::vector<std::vector<LabeledBox>> labels;  // empty when no label files
};
/// Loads every <stem>.bin in `dir` with its <stem>.json labels. With
/// require_labels false, labels are loaded only if all frames have them.
Dataset load_dataset(const std::filesystem::path& dir, bool require_labels);
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

std::string read_text(const std::filesystem::path& path);
void write_text(std::string_view text, const std::filesystem::path& path);

}  // namespace beamshift

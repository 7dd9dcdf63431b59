// beamshift: command-line front end for the density-adaptation library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "beamshift/beam_model.hpp"
#include "beamshift/error.hpp"
#include "beamshift/io_formats.hpp"
#include "beamshift/object_graph.hpp"
#include "beamshift/pipeline.hpp"
#include "beamshift/rbrs.hpp"
#include "beamshift/scene_synth.hpp"

namespace fs = std::filesystem;
using namespace beamshift;
using ordered_json = nlohmann::ordered_json;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kIoError = 2, kNumerical = 3, kSchema = 4 };

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
      return kIoError;
    case ErrorCode::kMalformedFile:
    case ErrorCode::kSchemaViolation:
      return kSchema;
    default:
      return kNumerical;
  }
}

struct Globals {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string output_dir = ".";
  std::size_t jobs = 1;
};

PipelineConfig load_config(const Globals& g) {
  if (g.config_path.empty()) return {};
  return decode_config(read_text(g.config_path));
}

fs::path output_dir(const Globals& g) {
  std::error_code ec;
  fs::create_directories(g.output_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + g.output_dir);
  return g.output_dir;
}

std::string dump(const ordered_json& j) {
  std::string s = j.dump(2, ' ', false, nlohmann::json::error_handler_t::strict);
  s += '\n';
  return s;
}

// Doubles go through format_double so every number re-parses exactly.
ordered_json number(double v) { return ordered_json::parse(format_double(v)); }

struct StatsArgs {
  std::string input;
  std::size_t beams = 0;
};

int cmd_stats(const Globals& g, const StatsArgs& a) {
  const PointCloud cloud = read_bin(a.input);
  BeamModel model = cluster_beams(cloud, a.beams);
  const auto& d = beam_density(model);
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(d.size());

  ordered_json s;
  s["beams"] = a.beams;
  s["points"] = cloud.size();
  s["min_density"] = number(*lo);
  s["max_density"] = number(*hi);
  s["mean_density"] = number(mean);
  s["converged"] = model.converged;
  s["iterations"] = model.iterations;
  const fs::path dir = output_dir(g);
  emit_density_csv(model, dir / "density.csv");
  write_text(dump(s), dir / "summary.json");
  std::cout << dump(s);
  return kOk;
}

struct ResampleArgs {
  std::string input;
  std::string mode;
  std::optional<double> gamma;
  std::size_t beams = 0;
  std::string output;
};

int cmd_resample(const Globals& g, const ResampleArgs& a) {
  const PipelineConfig base = load_config(g);
  RbrsConfig cfg;
  cfg.seed = g.seed;
  if (a.mode == "down") {
    cfg.mode = RbrsMode::kDownsample;
    cfg.down.gamma1 = a.gamma.value_or(base.pretrain.augmentation.down.gamma1);
  } else {
    cfg.mode = RbrsMode::kUpsample;
    cfg.up.gamma2 = a.gamma.value_or(base.pretrain.augmentation.up.gamma2);
  }
  const PointCloud cloud = read_bin(a.input);
  const PointCloud out = apply_rbrs(cloud, a.beams, cfg);
  write_bin(out, a.output);
  std::cerr << "resample: " << cloud.size() << " -> " << out.size() << " points\n";
  return kOk;
}

struct GraphLossArgs {
  std::string teacher;
  std::string student;
  std::string features;
  std::string output;
};

std::vector<BoxPrediction> predictions(const std::vector<LabeledBox>& labels,
                                       const Eigen::MatrixXd& features, const char* which) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(ErrorCode::kSchemaViolation,
                std::string("$.") + which + ": " + std::to_string(features.rows()) +
                    " feature rows for " + std::to_string(labels.size()) + " boxes");
  }
  std::vector<BoxPrediction> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    BoxPrediction p;
    p.center = labels[i].center;
    p.size = labels[i].size;
    p.yaw = labels[i].yaw;
    p.class_id = labels[i].class_id;
    p.confidence = labels[i].confidence.value_or(1.0);
    p.feature = features.row(static_cast<Eigen::Index>(i)).transpose();
    out.push_back(std::move(p));
  }
  return out;
}

int cmd_graph_loss(const Globals& g, const GraphLossArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const auto feats = decode_features(read_text(a.features));
  const auto teacher = predictions(read_labels(a.teacher), feats.teacher, "teacher");
  const auto student = predictions(read_labels(a.student), feats.student, "student");
  const auto r = evaluate_consistency(teacher, student, cfg.dts.graph, cfg.dts.match,
                                      cfg.dts.consistency);

  ordered_json j;
  j["L_node"] = number(r.loss.node);
  j["L_edge"] = number(r.loss.edge);
  j["L_cons"] = number(r.loss.total);
  ordered_json matches = ordered_json::array();
  const Eigen::MatrixXd fs_rows = stack_features(student);
  const Eigen::MatrixXd ft_rows = stack_features(teacher);
  for (std::size_t k = 0; k < r.matches.size(); ++k) {
    const std::size_t t = r.teacher_index[k], s = r.student_index[k];
    const auto ft = ft_rows.row(static_cast<Eigen::Index>(t));
    const auto fsr = fs_rows.row(static_cast<Eigen::Index>(s));
    const double cosine = ft.dot(fsr) / (ft.norm() * fsr.norm());
    ordered_json m;
    m["teacher"] = t;
    m["student"] = s;
    m["iou"] = number(r.matches[k].iou);
    m["node_term"] = number(std::exp(-cosine));
    matches.push_back(std::move(m));
  }
  j["matches"] = std::move(matches);
  ordered_json edge;
  edge["weight_alignment"] = number(r.edge_detail.weight_alignment);
  edge["glr_student"] = number(r.edge_detail.glr_student);
  edge["glr_teacher"] = number(r.edge_detail.glr_teacher);
  j["edge_detail"] = std::move(edge);

  const std::string text = dump(j);
  if (!a.output.empty()) write_text(text, a.output);
  std::cout << text;
  return kOk;
}

struct SynthArgs {
  std::string scanner;
  std::string scene;
  std::string output;
};

int cmd_synth(const Globals& g, const SynthArgs& a, bool seed_given) {
  const ScannerSpec scanner = decode_scanner(read_text(a.scanner));
  SceneSpec scene = decode_scene(read_text(a.scene));
  if (seed_given) scene.seed = g.seed;
  const RenderedScene r = render_scene(scanner, scene);
  fs::path stem = a.output;
  if (stem.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(stem.parent_path(), ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + stem.parent_path().string());
  }
  write_bin(r.cloud, fs::path(a.output + ".bin"));
  write_labels(r.labels, fs::path(a.output + ".json"));
  std::cerr << "synth: " << r.cloud.size() << " points, " << r.labels.size() << " objects\n";
  return kOk;
}

struct SelftrainArgs {
  std::string source;
  std::string target;
  std::optional<std::size_t> epochs;
};

int cmd_selftrain(const Globals& g, const SelftrainArgs& a) {
  PipelineConfig cfg = load_config(g);
  if (a.epochs) cfg.selftrain_epochs = *a.epochs;

  std::vector<LabeledFrame> source;
  std::vector<PointCloud> target;
  std::vector<std::vector<LabeledBox>> target_labels;
  if (a.source.empty() && a.target.empty()) {
    // No datasets given: synthesize the standard adaptation task at --seed.
    const AdaptationBenchmark bench = standard_benchmark(g.seed);
    source = make_domain(bench.source, g.jobs);
    for (auto& f : make_domain(bench.target, g.jobs)) {
      target.push_back(std::move(f.cloud));
      target_labels.push_back(std::move(f.labels));
    }
  } else if (a.source.empty() || a.target.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "--source and --target must be given together");
  } else {
    Dataset src = load_dataset(a.source, true);
    for (std::size_t i = 0; i < src.clouds.size(); ++i) {
      source.push_back({std::move(src.clouds[i]), std::move(src.labels[i])});
    }
    Dataset tgt = load_dataset(a.target, false);
    target = std::move(tgt.clouds);
    target_labels = std::move(tgt.labels);
  }
  if (source.empty()) throw Error(ErrorCode::kIo, "source dataset has no frames");
  if (target.empty()) throw Error(ErrorCode::kIo, "target dataset has no frames");

  const SelfTrainOutcome out = run_selftrain(source, target, target_labels, cfg, g.seed, g.jobs);
  const fs::path dir = output_dir(g);
  write_text(encode_report(out), dir / "report.json");
  write_text(curves_csv(out), dir / "curves.csv");
  const auto& epochs = out.report.epochs;
  std::cerr << "selftrain: " << source.size() << " source, " << target.size() << " target frames, "
            << epochs.size() << " epochs";
  if (!target_labels.empty()) {
    std::cerr << ", target MSE " << format_double(out.source_only_mse) << " -> "
              << format_double(epochs.empty() ? out.source_only_mse : epochs.back().student_mse);
  }
  std::cerr << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR beam-density adaptation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--config", g.config_path, "JSON config overlaid on the built-in defaults");
  app.add_option("--output-dir", g.output_dir, "Directory for command outputs")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads for frame-level work")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  StatsArgs stats;
  auto* s = app.add_subcommand("stats", "Recover beams and write the per-beam density table");
  s->add_option("--input", stats.input, "Point cloud (.bin)")->required();
  s->add_option("--beams", stats.beams, "Number of beams")->required();

  ResampleArgs resample;
  auto* r = app.add_subcommand("resample", "Random beam re-sampling of one cloud");
  r->add_option("--input", resample.input, "Point cloud (.bin)")->required();
  r->add_option("--mode", resample.mode, "down or up")
      ->required()
      ->check(CLI::IsMember({"down", "up"}));
  r->add_option("--gamma", resample.gamma, "gamma1 (down) or gamma2 (up), beams/rad")
      ->check(CLI::NonNegativeNumber);
  r->add_option("--beams", resample.beams, "Number of beams")->required();
  r->add_option("--output", resample.output, "Output cloud (.bin)")->required();

  GraphLossArgs loss;
  auto* l = app.add_subcommand("graph-loss", "Object-graph consistency between two prediction sets");
  l->add_option("--teacher", loss.teacher, "Teacher labels (.json)")->required();
  l->add_option("--student", loss.student, "Student labels (.json)")->required();
  l->add_option("--features", loss.features, "Feature rows {teacher: [[...]], student: [[...]]}")
      ->required();
  l->add_option("--output", loss.output, "Also write the result to this file");

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Render a synthetic scan of a box scene");
  y->add_option("--scanner", synth.scanner, "Scanner spec (.json)")->required();
  y->add_option("--scene", synth.scene, "Scene spec (.json)")->required();
  y->add_option("--output", synth.output, "Output stem; writes <stem>.bin and <stem>.json")
      ->required();

  SelftrainArgs train;
  auto* t = app.add_subcommand("selftrain",
                               "Pre-train on source, self-train on target; without datasets runs "
                               "the standard synthetic task");
  t->add_option("--source", train.source, "Directory of labeled source frames");
  t->add_option("--target", train.target, "Directory of target frames (labels optional)");
  t->add_option("--epochs", train.epochs, "Self-training epochs (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*s) return cmd_stats(g, stats);
    if (*r) return cmd_resample(g, resample);
    if (*l) return cmd_graph_loss(g, loss);
    if (*y) return cmd_synth(g, synth, seed_opt->count() > 0);
    if (*t) return cmd_selftrain(g, train);
  } catch (const Error& e) {
    std::cerr << "beamshift: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "beamshift: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

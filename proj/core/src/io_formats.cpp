#include "beamshift/io_formats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "beamshift/error.hpp"

namespace beamshift {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, path + ": " + what);
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("invalid JSON: ") + e.what());
  }
}

std::string child(const std::string& path, std::string_view key) {
  return path + "." + std::string(key);
}

std::string child(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
}

void expect_array(const json& j, const std::string& path) {
  if (!j.is_array()) schema_error(path, "expected an array");
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<std::string_view> allowed) {
  expect_object(j, path);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      schema_error(child(path, key), "unknown key \"" + key + "\"");
    }
  }
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  return j.get<double>();
}

std::int64_t as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) schema_error(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::size_t as_count(const json& j, const std::string& path) {
  const std::int64_t v = as_integer(j, path);
  if (v < 0) schema_error(path, "expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

const json& required(const json& j, const std::string& path, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) schema_error(child(path, key), "missing required key");
  return *it;
}

double required_number(const json& j, const std::string& path, const char* key) {
  return as_number(required(j, path, key), child(path, key));
}

void overlay(const json& j, const std::string& path, const char* key, double& out) {
  if (const auto it = j.find(key); it != j.end()) out = as_number(*it, child(path, key));
}

void overlay(const json& j, const std::string& path, const char* key, std::size_t& out) {
  if (const auto it = j.find(key); it != j.end()) out = as_count(*it, child(path, key));
}

void overlay(const json& j, const std::string& path, const char* key, bool& out) {
  if (const auto it = j.find(key); it != j.end()) {
    if (!it->is_boolean()) schema_error(child(path, key), "expected a boolean");
    out = it->get<bool>();
  }
}

void require_positive(double v, const std::string& path) {
  if (!(v > 0.0)) schema_error(path, "must be positive");
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFF000000u) >> 24) | ((v & 0x00FF0000u) >> 8) | ((v & 0x0000FF00u) << 8) |
        ((v & 0x000000FFu) << 24);
  }
  return v;
}

const char* mode_name(RbrsMode mode) {
  switch (mode) {
    case RbrsMode::kPassthrough: return "passthrough";
    case RbrsMode::kDownsample: return "down";
    case RbrsMode::kUpsample: return "up";
  }
  return "passthrough";
}

RbrsMode parse_mode(const json& j, const std::string& path) {
  if (!j.is_string()) schema_error(path, "expected a string");
  const std::string s = j.get<std::string>();
  if (s == "passthrough") return RbrsMode::kPassthrough;
  if (s == "down") return RbrsMode::kDownsample;
  if (s == "up") return RbrsMode::kUpsample;
  schema_error(path, "unknown mode \"" + s + "\" (expected passthrough, down or up)");
}

ordered_json encode_rbrs(const RbrsConfig& cfg) {
  ordered_json j;
  j["mode"] = mode_name(cfg.mode);
  j["gamma1"] = cfg.down.gamma1;
  j["gamma2"] = cfg.up.gamma2;
  return j;
}

void overlay_rbrs(const json& j, const std::string& path, RbrsConfig& cfg) {
  check_keys(j, path, {"mode", "gamma1", "gamma2"});
  if (const auto it = j.find("mode"); it != j.end()) cfg.mode = parse_mode(*it, child(path, "mode"));
  overlay(j, path, "gamma1", cfg.down.gamma1);
  overlay(j, path, "gamma2", cfg.up.gamma2);
}

ordered_json params_json(const DetectorParams& p) { return ordered_json(p.theta); }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + path.string());
  return ss.str();
}

void write_text(std::string_view text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot create " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::string encode_bin(const PointCloud& cloud) {
  std::string out(cloud.size() * 16, '\0');
  char* dst = out.data();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    for (const double v : {p.x, p.y, p.z, p.intensity}) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "point " + std::to_string(i) + " is not representable as finite float32");
      }
      const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(f));
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
  }
  return out;
}

PointCloud decode_bin(std::string_view bytes) {
  if (bytes.size() % 16 != 0) {
    throw Error(ErrorCode::kMalformedFile,
                "point file length " + std::to_string(bytes.size()) + " is not a multiple of 16");
  }
  PointCloud cloud;
  cloud.points.resize(bytes.size() / 16);
  const char* src = bytes.data();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    double v[4];
    for (double& x : v) {
      std::uint32_t bits;
      std::memcpy(&bits, src, 4);
      src += 4;
      const float f = std::bit_cast<float>(to_little_endian(bits));
      if (!std::isfinite(f)) {
        throw Error(ErrorCode::kMalformedFile, "point " + std::to_string(i) + " has a non-finite value");
      }
      x = f;
    }
    cloud.points[i] = {v[0], v[1], v[2], v[3]};
  }
  return cloud;
}

PointCloud read_bin(const std::filesystem::path& path) {
  try {
    return decode_bin(read_text(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedFile) {
      throw Error(ErrorCode::kMalformedFile, path.string() + ": " + e.message());
    }
    throw;
  }
}

void write_bin(const PointCloud& cloud, const std::filesystem::path& path) {
  write_text(encode_bin(cloud), path);
}

std::string encode_labels(std::span<const LabeledBox> labels) {
  ordered_json arr = ordered_json::array();
  for (const auto& b : labels) {
    ordered_json j;
    j["cx"] = b.center.x();
    j["cy"] = b.center.y();
    j["cz"] = b.center.z();
    j["l"] = b.size.x();
    j["w"] = b.size.y();
    j["h"] = b.size.z();
    j["yaw"] = b.yaw;
    j["class_id"] = b.class_id;
    if (b.confidence) j["confidence"] = *b.confidence;
    arr.push_back(std::move(j));
  }
  return dump(arr);
}

std::vector<LabeledBox> decode_labels(std::string_view text) {
  const json root = parse_json(text);
  const std::string path = "$";
  expect_array(root, path);
  std::vector<LabeledBox> out;
  out.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    const json& j = root[i];
    const std::string p = child(path, i);
    check_keys(j, p, {"cx", "cy", "cz", "l", "w", "h", "yaw", "class_id", "confidence"});
    LabeledBox b;
    b.center = {required_number(j, p, "cx"), required_number(j, p, "cy"), required_number(j, p, "cz")};
    b.size = {required_number(j, p, "l"), required_number(j, p, "w"), required_number(j, p, "h")};
    require_positive(b.size.x(), child(p, "l"));
    require_positive(b.size.y(), child(p, "w"));
    require_positive(b.size.z(), child(p, "h"));
    b.yaw = required_number(j, p, "yaw");
    const std::int64_t cls = as_integer(required(j, p, "class_id"), child(p, "class_id"));
    if (cls < 0 || cls > 1'000'000) schema_error(child(p, "class_id"), "out of range");
    b.class_id = static_cast<int>(cls);
    if (const auto it = j.find("confidence"); it != j.end()) {
      b.confidence = as_number(*it, child(p, "confidence"));
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<LabeledBox> read_labels(const std::filesystem::path& path) {
  try {
    return decode_labels(read_text(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo) throw;
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

void write_labels(std::span<const LabeledBox> labels, const std::filesystem::path& path) {
  write_text(encode_labels(labels), path);
}

std::string density_csv(const BeamModel& model) {
  if (model.densities.size() != model.beam_count || model.centers.size() != model.beam_count) {
    throw Error(ErrorCode::kInvalidArgument, "beam model has no densities");
  }
  std::string out = "beam_index,zenith_rad,density_per_rad\n";
  for (std::size_t j = 0; j < model.beam_count; ++j) {
    out += std::to_string(j);
    out += ',';
    out += format_double(model.centers[j]);
    out += ',';
    out += format_double(model.densities[j]);
    out += '\n';
  }
  return out;
}

void emit_density_csv(const BeamModel& model, const std::filesystem::path& path) {
  write_text(density_csv(model), path);
}

std::vector<DensityRow> parse_density_csv(std::string_view text) {
  std::vector<DensityRow> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line_no == 1) {
      if (line != "beam_index,zenith_rad,density_per_rad") {
        throw Error(ErrorCode::kMalformedFile, "density CSV: unexpected header");
      }
      continue;
    }
    if (line.empty() && text.empty()) break;
    DensityRow row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto fail = [&] {
      throw Error(ErrorCode::kMalformedFile, "density CSV: bad row at line " + std::to_string(line_no));
    };
    auto r1 = std::from_chars(p, end, row.beam_index);
    if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != ',') fail();
    auto r2 = std::from_chars(r1.ptr + 1, end, row.zenith);
    if (r2.ec != std::errc{} || r2.ptr == end || *r2.ptr != ',') fail();
    auto r3 = std::from_chars(r2.ptr + 1, end, row.density);
    if (r3.ec != std::errc{} || r3.ptr != end) fail();
    rows.push_back(row);
  }
  if (line_no == 0) throw Error(ErrorCode::kMalformedFile, "density CSV: empty");
  return rows;
}

ScannerSpec decode_scanner(std::string_view text) {
  const json j = parse_json(text);
  const std::string path = "$";
  check_keys(j, path, {"beam_zeniths", "beams", "azimuth_step", "max_range", "noise_sigma"});
  ScannerSpec s;
  const bool explicit_beams = j.contains("beam_zeniths");
  if (explicit_beams == j.contains("beams")) {
    schema_error(path, "exactly one of beam_zeniths or beams is required");
  }
  if (explicit_beams) {
    const json& arr = j["beam_zeniths"];
    const std::string p = child(path, "beam_zeniths");
    expect_array(arr, p);
    for (std::size_t i = 0; i < arr.size(); ++i) s.beam_zeniths.push_back(as_number(arr[i], child(p, i)));
  } else {
    const json& b = j["beams"];
    const std::string p = child(path, "beams");
    check_keys(b, p, {"kind", "count", "zenith_min", "zenith_max", "grade"});
    const json& kind = required(b, p, "kind");
    if (!kind.is_string()) schema_error(child(p, "kind"), "expected a string");
    const std::size_t count = as_count(required(b, p, "count"), child(p, "count"));
    const double lo = required_number(b, p, "zenith_min");
    const double hi = required_number(b, p, "zenith_max");
    if (count < 2) schema_error(child(p, "count"), "at least 2 beams required");
    if (!(lo < hi)) schema_error(p, "zenith_min must be below zenith_max");
    if (kind == "uniform") {
      if (b.contains("grade")) schema_error(child(p, "grade"), "only valid for graded layouts");
      s.beam_zeniths = uniform_beams(count, lo, hi);
    } else if (kind == "graded") {
      const double grade = required_number(b, p, "grade");
      if (!(grade > 1.0)) schema_error(child(p, "grade"), "must exceed 1");
      s.beam_zeniths = graded_beams(count, lo, hi, grade);
    } else {
      schema_error(child(p, "kind"), "expected uniform or graded");
    }
  }
  s.azimuth_step = required_number(j, path, "azimuth_step");
  overlay(j, path, "max_range", s.max_range);
  overlay(j, path, "noise_sigma", s.noise_sigma);
  try {
    validate(s);
  } catch (const Error& e) {
    schema_error(path, e.what());
  }
  return s;
}

std::string encode_scanner(const ScannerSpec& scanner) {
  ordered_json j;
  j["beam_zeniths"] = scanner.beam_zeniths;
  j["azimuth_step"] = scanner.azimuth_step;
  j["max_range"] = scanner.max_range;
  j["noise_sigma"] = scanner.noise_sigma;
  return dump(j);
}

SceneSpec decode_scene(std::string_view text) {
  const json j = parse_json(text);
  const std::string path = "$";
  check_keys(j, path, {"ground_z", "seed", "objects"});
  SceneSpec s;
  overlay(j, path, "ground_z", s.ground_z);
  if (const auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
      schema_error(child(path, "seed"), "expected a non-negative integer");
    }
    s.seed = it->get<std::uint64_t>();
  }
  const json& objs = required(j, path, "objects");
  const std::string p = child(path, "objects");
  expect_array(objs, p);
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const json& o = objs[i];
    const std::string op = child(p, i);
    check_keys(o, op, {"cx", "cy", "l", "w", "yaw", "h", "class_id"});
    SceneObject obj;
    obj.box = {required_number(o, op, "cx"), required_number(o, op, "cy"),
               required_number(o, op, "l"), required_number(o, op, "w"),
               required_number(o, op, "yaw")};
    obj.height = required_number(o, op, "h");
    require_positive(obj.box.length, child(op, "l"));
    require_positive(obj.box.width, child(op, "w"));
    require_positive(obj.height, child(op, "h"));
    if (const auto it = o.find("class_id"); it != o.end()) {
      const std::int64_t cls = as_integer(*it, child(op, "class_id"));
      if (cls < 0 || cls > 1'000'000) schema_error(child(op, "class_id"), "out of range");
      obj.class_id = static_cast<int>(cls);
    }
    s.objects.push_back(obj);
  }
  try {
    validate(s);
  } catch (const Error& e) {
    schema_error(path, e.what());
  }
  return s;
}

std::string encode_scene(const SceneSpec& scene) {
  ordered_json j;
  j["ground_z"] = scene.ground_z;
  j["seed"] = scene.seed;
  ordered_json objs = ordered_json::array();
  for (const auto& o : scene.objects) {
    ordered_json e;
    e["cx"] = o.box.cx;
    e["cy"] = o.box.cy;
    e["l"] = o.box.length;
    e["w"] = o.box.width;
    e["yaw"] = o.box.yaw;
    e["h"] = o.height;
    e["class_id"] = o.class_id;
    objs.push_back(std::move(e));
  }
  j["objects"] = std::move(objs);
  return dump(j);
}

FeatureSets decode_features(std::string_view text) {
  const json j = parse_json(text);
  const std::string path = "$";
  check_keys(j, path, {"teacher", "student"});
  auto matrix = [&](const char* key) {
    const json& arr = required(j, path, key);
    const std::string p = child(path, key);
    expect_array(arr, p);
    Eigen::MatrixXd m;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string rp = child(p, i);
      expect_array(arr[i], rp);
      if (i == 0) {
        m.resize(static_cast<Eigen::Index>(arr.size()), static_cast<Eigen::Index>(arr[i].size()));
      } else if (static_cast<Eigen::Index>(arr[i].size()) != m.cols()) {
        schema_error(rp, "row length differs from row 0");
      }
      for (std::size_t c = 0; c < arr[i].size(); ++c) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = as_number(arr[i][c], child(rp, c));
      }
    }
    return m;
  };
  return {matrix("teacher"), matrix("student")};
}

std::string encode_config(const PipelineConfig& cfg) {
  ordered_json j;
  j["version"] = PipelineConfig::kVersion;
  j["pseudo"] = {{"c_th", cfg.dts.pseudo.c_th}};
  j["ema"] = {{"alpha", cfg.dts.ema.alpha}};
  ordered_json graph;
  graph["eps1"] = cfg.dts.graph.eps1;
  graph["eps2"] = cfg.dts.graph.eps2;
  graph["tau"] = cfg.dts.graph.tau;
  graph["node_conf_threshold"] = cfg.dts.graph.node_conf_threshold;
  graph["wrap_yaw"] = cfg.dts.graph.wrap_yaw;
  j["graph"] = std::move(graph);
  j["match"] = {{"iou_th", cfg.dts.match.iou_th}};
  ordered_json cons;
  cons["beta1"] = cfg.dts.consistency.beta1;
  cons["beta2"] = cfg.dts.consistency.beta2;
  cons["gamma"] = cfg.dts.consistency.gamma;
  j["consistency"] = std::move(cons);
  ordered_json pre;
  pre["epochs"] = cfg.pretrain.epochs;
  pre["learning_rate"] = cfg.pretrain.learning_rate;
  pre["beam_count"] = cfg.pretrain.beam_count;
  pre["augmentation"] = encode_rbrs(cfg.pretrain.augmentation);
  j["pretrain"] = std::move(pre);
  ordered_json st;
  st["epochs"] = cfg.selftrain_epochs;
  st["learning_rate"] = cfg.dts.learning_rate;
  st["beam_count"] = cfg.dts.beam_count;
  st["augmentation"] = encode_rbrs(cfg.dts.student_augmentation);
  j["selftrain"] = std::move(st);
  const ToyDetectorConfig& d = cfg.detector;
  ordered_json det;
  det["ground_z"] = d.ground_z;
  det["ground_margin"] = d.ground_margin;
  det["cluster_distance"] = d.cluster_distance;
  det["min_cluster_points"] = d.min_cluster_points;
  det["confidence_points"] = d.confidence_points;
  det["feature_scale"] = d.feature_scale;
  det["reliability_points"] = d.reliability_points;
  det["row_gap"] = d.row_gap;
  ordered_json templates = ordered_json::array();
  for (const auto& t : d.class_templates) templates.push_back({t.x(), t.y(), t.z()});
  det["class_templates"] = std::move(templates);
  det["match_iou_th"] = d.match.iou_th;
  j["detector"] = std::move(det);
  return dump(j);
}

PipelineConfig decode_config(std::string_view text, const PipelineConfig& base) {
  const json j = parse_json(text);
  const std::string path = "$";
  check_keys(j, path, {"version", "pseudo", "ema", "graph", "match", "consistency", "pretrain",
                       "selftrain", "detector"});
  const std::int64_t version = as_integer(required(j, path, "version"), child(path, "version"));
  if (version != PipelineConfig::kVersion) {
    schema_error(child(path, "version"), "unsupported config version " + std::to_string(version));
  }
  PipelineConfig cfg = base;
  auto section = [&](const char* key, std::initializer_list<std::string_view> keys,
                     auto&& apply) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    const std::string p = child(path, key);
    check_keys(*it, p, keys);
    apply(*it, p);
  };
  section("pseudo", {"c_th"}, [&](const json& s, const std::string& p) {
    overlay(s, p, "c_th", cfg.dts.pseudo.c_th);
  });
  section("ema", {"alpha"}, [&](const json& s, const std::string& p) {
    overlay(s, p, "alpha", cfg.dts.ema.alpha);
  });
  section("graph", {"eps1", "eps2", "tau", "node_conf_threshold", "wrap_yaw"},
          [&](const json& s, const std::string& p) {
            overlay(s, p, "eps1", cfg.dts.graph.eps1);
            overlay(s, p, "eps2", cfg.dts.graph.eps2);
            overlay(s, p, "tau", cfg.dts.graph.tau);
            overlay(s, p, "node_conf_threshold", cfg.dts.graph.node_conf_threshold);
            overlay(s, p, "wrap_yaw", cfg.dts.graph.wrap_yaw);
            require_positive(cfg.dts.graph.tau, child(p, "tau"));
          });
  section("match", {"iou_th"}, [&](const json& s, const std::string& p) {
    overlay(s, p, "iou_th", cfg.dts.match.iou_th);
  });
  section("consistency", {"beta1", "beta2", "gamma"}, [&](const json& s, const std::string& p) {
    overlay(s, p, "beta1", cfg.dts.consistency.beta1);
    overlay(s, p, "beta2", cfg.dts.consistency.beta2);
    overlay(s, p, "gamma", cfg.dts.consistency.gamma);
  });
  section("pretrain", {"epochs", "learning_rate", "beam_count", "augmentation"},
          [&](const json& s, const std::string& p) {
            overlay(s, p, "epochs", cfg.pretrain.epochs);
            overlay(s, p, "learning_rate", cfg.pretrain.learning_rate);
            overlay(s, p, "beam_count", cfg.pretrain.beam_count);
            if (const auto it = s.find("augmentation"); it != s.end()) {
              overlay_rbrs(*it, child(p, "augmentation"), cfg.pretrain.augmentation);
            }
          });
  section("selftrain", {"epochs", "learning_rate", "beam_count", "augmentation"},
          [&](const json& s, const std::string& p) {
            overlay(s, p, "epochs", cfg.selftrain_epochs);
            overlay(s, p, "learning_rate", cfg.dts.learning_rate);
            overlay(s, p, "beam_count", cfg.dts.beam_count);
            if (const auto it = s.find("augmentation"); it != s.end()) {
              overlay_rbrs(*it, child(p, "augmentation"), cfg.dts.student_augmentation);
            }
          });
  section("detector",
          {"ground_z", "ground_margin", "cluster_distance", "min_cluster_points",
           "confidence_points", "feature_scale", "reliability_points", "row_gap",
           "class_templates", "match_iou_th"},
          [&](const json& s, const std::string& p) {
            ToyDetectorConfig& d = cfg.detector;
            overlay(s, p, "ground_z", d.ground_z);
            overlay(s, p, "ground_margin", d.ground_margin);
            overlay(s, p, "cluster_distance", d.cluster_distance);
            overlay(s, p, "min_cluster_points", d.min_cluster_points);
            overlay(s, p, "confidence_points", d.confidence_points);
            overlay(s, p, "feature_scale", d.feature_scale);
            overlay(s, p, "reliability_points", d.reliability_points);
            overlay(s, p, "row_gap", d.row_gap);
            overlay(s, p, "match_iou_th", d.match.iou_th);
            if (const auto it = s.find("class_templates"); it != s.end()) {
              const std::string tp = child(p, "class_templates");
              expect_array(*it, tp);
              if (it->empty()) schema_error(tp, "at least one class template required");
              d.class_templates.clear();
              for (std::size_t i = 0; i < it->size(); ++i) {
                const json& t = (*it)[i];
                const std::string ep = child(tp, i);
                expect_array(t, ep);
                if (t.size() != 3) schema_error(ep, "expected [l, w, h]");
                Eigen::Vector3d v;
                for (int k = 0; k < 3; ++k) {
                  v(k) = as_number(t[static_cast<std::size_t>(k)], child(ep, static_cast<std::size_t>(k)));
                  require_positive(v(k), child(ep, static_cast<std::size_t>(k)));
                }
                d.class_templates.push_back(v);
              }
            }
          });
  return cfg;
}

std::string encode_report(const SelfTrainOutcome& outcome) {
  ordered_json j;
  j["version"] = PipelineConfig::kVersion;
  j["pretrain_loss"] = outcome.pretrain_losses;
  j["source_only_mse"] = outcome.source_only_mse;
  ordered_json epochs = ordered_json::array();
  for (std::size_t e = 0; e < outcome.report.epochs.size(); ++e) {
    const EpochReport& r = outcome.report.epochs[e];
    ordered_json row;
    row["epoch"] = e + 1;
    row["det"] = r.det;
    row["node"] = r.node;
    row["edge"] = r.edge;
    row["cons"] = r.cons;
    row["total"] = r.total;
    row["matched_pairs"] = r.matched_pairs;
    row["pseudo_labels"] = r.pseudo_labels;
    row["student_mse"] = r.student_mse;
    row["teacher_mse"] = r.teacher_mse;
    epochs.push_back(std::move(row));
  }
  j["epochs"] = std::move(epochs);
  const double final_mse = outcome.report.epochs.empty() ? outcome.source_only_mse
                                                         : outcome.report.epochs.back().student_mse;
  j["final_target_mse"] = final_mse;
  ordered_json params;
  params["pretrained"] = params_json(outcome.pretrained);
  params["student"] = params_json(outcome.student);
  params["teacher"] = params_json(outcome.teacher);
  j["params"] = std::move(params);
  return dump(j);
}

std::string curves_csv(const SelfTrainOutcome& outcome) {
  std::string out =
      "epoch,det,node,edge,cons,total,matched_pairs,pseudo_labels,student_mse,teacher_mse\n";
  out += "0,,,,,,,," + format_double(outcome.source_only_mse) + "," +
         format_double(outcome.source_only_mse) + "\n";
  for (std::size_t e = 0; e < outcome.report.epochs.size(); ++e) {
    const EpochReport& r = outcome.report.epochs[e];
    out += std::to_string(e + 1);
    for (const double v : {r.det, r.node, r.edge, r.cons, r.total}) out += "," + format_double(v);
    out += "," + std::to_string(r.matched_pairs) + "," + std::to_string(r.pseudo_labels);
    out += "," + format_double(r.student_mse) + "," + format_double(r.teacher_mse) + "\n";
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir, bool require_labels) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
  Dataset ds;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".bin") {
      ds.names.push_back(entry.path().stem().string());
    }
  }
  if (ec) throw Error(ErrorCode::kIo, "cannot list " + dir.string());
  std::sort(ds.names.begin(), ds.names.end());
  bool all_labeled = true;
  for (const auto& name : ds.names) {
    ds.clouds.push_back(read_bin(dir / (name + ".bin")));
    if (!fs::exists(dir / (name + ".json"))) all_labeled = false;
  }
  if (require_labels && !all_labeled) {
    throw Error(ErrorCode::kIo, "missing label files in " + dir.string());
  }
  if (all_labeled && !ds.names.empty()) {
    for (const auto& name : ds.names) ds.labels.push_back(read_labels(dir / (name + ".json")));
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
  for (std::size_t i = 0; i < dataset.names.size(); ++i) {
    write_bin(dataset.clouds[i], dir / (dataset.names[i] + ".bin"));
    if (i < dataset.labels.size()) write_labels(dataset.labels[i], dir / (dataset.names[i] + ".json"));
  }
}

}  // namespace beamshift

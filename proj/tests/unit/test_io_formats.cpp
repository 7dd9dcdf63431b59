#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "beamshift/beam_model.hpp"
#include "beamshift/error.hpp"
#include "beamshift/io_formats.hpp"
#include "beamshift/scene_synth.hpp"

using namespace beamshift;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

std::string float_bytes(std::initializer_list<float> v) {
  std::string out;
  for (float f : v) {
    char b[4];
    std::memcpy(b, &f, 4);
    out.append(b, 4);
  }
  return out;
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("beamshift_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Bin, Examples) {
  EXPECT_TRUE(decode_bin("").empty());
  const auto c = decode_bin(float_bytes({1, 2, 3, 0.5f}));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.points[0], (CartesianPoint{1, 2, 3, 0.5}));
  EXPECT_EQ(encode_bin(c), float_bytes({1, 2, 3, 0.5f}));
}

TEST(Bin, MalformedInput) {
  EXPECT_EQ(code_of([] { decode_bin(std::string(15, '\0')); }), ErrorCode::kMalformedFile);
  EXPECT_EQ(code_of([] { decode_bin(float_bytes({1, 2, std::numeric_limits<float>::quiet_NaN(), 0})); }),
            ErrorCode::kMalformedFile);
  EXPECT_EQ(code_of([] { decode_bin(float_bytes({1, std::numeric_limits<float>::infinity(), 0, 0})); }),
            ErrorCode::kMalformedFile);
  EXPECT_EQ(code_of([] { encode_bin(PointCloud{{{1e300, 0, 0, 0}}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { read_bin("/nonexistent/beamshift.bin"); }), ErrorCode::kIo);
}

TEST(Bin, ByteRoundTripOfLargeFile) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-100.0f, 100.0f), i(0.0f, 1.0f);
  std::string bytes;
  for (int k = 0; k < 100000; ++k) bytes += float_bytes({u(rng), u(rng), u(rng) * 0.05f, i(rng)});
  const auto dir = temp_dir("bin");
  write_text(bytes, dir / "a.bin");
  const auto cloud = read_bin(dir / "a.bin");
  ASSERT_EQ(cloud.size(), 100000u);
  write_bin(cloud, dir / "b.bin");
  EXPECT_EQ(read_text(dir / "b.bin"), bytes);
  fs::remove_all(dir);
}

TEST(Labels, RoundTrip) {
  EXPECT_TRUE(decode_labels("[]").empty());
  LabeledBox b;
  b.center = {1.0 / 3.0, -2.5, 0.1};
  b.size = {3.9, 1.6, 1.56};
  b.yaw = -0.7;
  b.class_id = 2;
  LabeledBox c = b;
  c.confidence = 0.123456789012345;
  const std::vector<LabeledBox> v{b, c};
  const auto back = decode_labels(encode_labels(v));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], b);
  EXPECT_EQ(back[1], c);
  EXPECT_FALSE(back[0].confidence.has_value());
}

TEST(Labels, StrictSchema) {
  try {
    decode_labels(R"([{"cx":0,"cy":0,"cz":0,"l":1,"w":1,"h":1,"yaw":0,"class_id":0,"color":1}])");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaViolation);
    EXPECT_NE(std::string(e.what()).find("color"), std::string::npos);
  }
  try {
    decode_labels(R"([{"cx":0,"cy":0,"cz":0,"l":-1,"w":1,"h":1,"yaw":0,"class_id":0}])");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("$[0].l"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { decode_labels(R"([{"cx":0}])"); }), ErrorCode::kSchemaViolation);
  EXPECT_EQ(code_of([] { decode_labels("{}"); }), ErrorCode::kSchemaViolation);
  EXPECT_EQ(code_of([] { decode_labels("[1,"); }), ErrorCode::kMalformedFile);
}

TEST(DensityCsv, UniformAndGraded) {
  auto m = cluster_zeniths(std::vector<double>{0.0, 0.1}, 2);
  const auto text = density_csv(m);
  EXPECT_EQ(text.substr(0, text.find('\n')), "beam_index,zenith_rad,density_per_rad");
  const auto rows = parse_density_csv(text);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].density, rows[1].density);

  const auto z = graded_beams(40, -0.4, 0.05, 1.05);
  const auto g = cluster_zeniths(z, 40);
  const auto grows = parse_density_csv(density_csv(g));
  for (std::size_t j = 1; j + 1 < grows.size(); ++j) EXPECT_GT(grows[j].density, grows[j - 1].density);
  for (std::size_t j = 0; j < grows.size(); ++j) {
    EXPECT_EQ(grows[j].beam_index, j);
    EXPECT_EQ(grows[j].zenith, g.centers[j]);
    EXPECT_EQ(grows[j].density, g.densities[j]);
  }
}

TEST(FormatDouble, ShortestRoundTrip) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng) / 7.0;
    ASSERT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Config, RoundTripAndOverlay) {
  PipelineConfig cfg;
  cfg.dts.consistency.beta1 = 0.07;
  cfg.dts.student_augmentation.mode = RbrsMode::kUpsample;
  cfg.pretrain.epochs = 3;
  cfg.detector.class_templates.push_back({0.8, 0.6, 1.7});
  const auto text = encode_config(cfg);
  const auto back = decode_config(text);
  EXPECT_EQ(encode_config(back), text);
  EXPECT_EQ(back.dts.consistency.beta1, 0.07);
  EXPECT_EQ(back.detector.class_templates.size(), 2u);

  const auto partial = decode_config(R"({"version":1,"ema":{"alpha":0.5}})");
  EXPECT_EQ(partial.dts.ema.alpha, 0.5);
  EXPECT_EQ(partial.dts.consistency.beta2, 0.3);
}

TEST(Config, DefaultsMatchPublishedSettings) {
  const PipelineConfig d;
  EXPECT_EQ(d.dts.ema.alpha, 0.999);
  EXPECT_EQ(d.dts.pseudo.c_th, 0.5);
  EXPECT_EQ(d.dts.graph.node_conf_threshold, 0.5);
  EXPECT_EQ(d.dts.graph.eps1, 5.0);
  EXPECT_EQ(d.dts.graph.eps2, 20.0);
  EXPECT_EQ(d.dts.graph.tau, 13.0);
  EXPECT_EQ(d.dts.match.iou_th, 0.1);
  EXPECT_EQ(d.dts.consistency.beta1, 0.05);
  EXPECT_EQ(d.dts.consistency.beta2, 0.3);
  EXPECT_EQ(d.dts.consistency.gamma, 0.5);
  EXPECT_EQ(d.pretrain.augmentation.down.gamma1, 75.0);
  EXPECT_EQ(d.pretrain.augmentation.up.gamma2, 25.0);
}

TEST(Config, Strictness) {
  EXPECT_EQ(code_of([] { decode_config(R"({"ema":{"alpha":0.5}})"); }), ErrorCode::kSchemaViolation);
  EXPECT_EQ(code_of([] { decode_config(R"({"version":2})"); }), ErrorCode::kSchemaViolation);
  EXPECT_EQ(code_of([] { decode_config(R"({"version":1,"ema":{"beta":0.5}})"); }),
            ErrorCode::kSchemaViolation);
  EXPECT_EQ(code_of([] { decode_config(R"({"version":1,"ema":{"alpha":"x"}})"); }),
            ErrorCode::kSchemaViolation);
}

TEST(Scanner, UniformAndExplicit) {
  const auto s = decode_scanner(
      R"({"beams":{"kind":"uniform","count":4,"zenith_min":-0.3,"zenith_max":0.0},"azimuth_step":0.017453292519943295})");
  EXPECT_EQ(s.beam_zeniths, uniform_beams(4, -0.3, 0.0));
  const auto back = decode_scanner(encode_scanner(s));
  EXPECT_EQ(back.beam_zeniths, s.beam_zeniths);
  EXPECT_EQ(back.azimuth_step, s.azimuth_step);
  EXPECT_EQ(code_of([] { decode_scanner(R"({"beam_zeniths":[0.1,0.0],"azimuth_step":0.1})"); }),
            ErrorCode::kSchemaViolation);
}

TEST(Scene, RoundTrip) {
  SceneSpec scene;
  scene.seed = 42;
  scene.objects.push_back({{10.0, -2.0, 4.0, 1.7, 0.25}, 1.5, 1});
  const auto back = decode_scene(encode_scene(scene));
  EXPECT_EQ(back.seed, 42u);
  ASSERT_EQ(back.objects.size(), 1u);
  EXPECT_EQ(back.objects[0].box.yaw, 0.25);
  EXPECT_EQ(back.objects[0].class_id, 1);
  EXPECT_EQ(back.ground_z, scene.ground_z);
}

TEST(Features, Decode) {
  const auto f = decode_features(R"({"teacher":[[1,2],[3,4]],"student":[[5,6],[7,8]]})");
  EXPECT_EQ(f.teacher.rows(), 2);
  EXPECT_EQ(f.student(1, 0), 7.0);
  EXPECT_EQ(code_of([] { decode_features(R"({"teacher":[[1,2],[3]],"student":[]})"); }),
            ErrorCode::kSchemaViolation);
}

TEST(Dataset, SaveAndLoad) {
  Dataset d;
  d.names = {"000001", "000000"};
  d.clouds = {PointCloud{{{1, 2, 3, 0.25}}}, PointCloud{{{4, 5, 6, 0.5}}}};
  LabeledBox b;
  d.labels = {{b}, {}};
  const auto dir = temp_dir("dataset");
  save_dataset(d, dir);
  const auto back = load_dataset(dir, true);
  ASSERT_EQ(back.names, (std::vector<std::string>{"000000", "000001"}));
  EXPECT_EQ(back.clouds[0], d.clouds[1]);
  EXPECT_EQ(back.labels[1].size(), 1u);
  fs::remove(dir / "000000.json");
  EXPECT_TRUE(load_dataset(dir, false).labels.empty());
  EXPECT_EQ(code_of([&] { load_dataset(dir, true); }), ErrorCode::kIo);
  fs::remove_all(dir);
}

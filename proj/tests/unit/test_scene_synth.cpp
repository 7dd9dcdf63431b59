#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "beamshift/beam_model.hpp"
#include "beamshift/error.hpp"
#include "beamshift/geometry.hpp"
#include "beamshift/scene_synth.hpp"

using namespace beamshift;
using std::numbers::pi;

namespace {

constexpr double kDeg = pi / 180.0;

ScannerSpec scanner(std::vector<double> zeniths, double step = 2 * pi / 720) {
  ScannerSpec s;
  s.beam_zeniths = std::move(zeniths);
  s.azimuth_step = step;
  s.max_range = 80.0;
  return s;
}

}  // namespace

TEST(UniformBeams, Examples) {
  EXPECT_EQ(uniform_beams(2, 0.0, 1.0), (std::vector<double>{0.0, 1.0}));
  const auto z = uniform_beams(32, -30 * kDeg, 10 * kDeg);
  EXPECT_EQ(z.front(), -30 * kDeg);
  EXPECT_EQ(z.back(), 10 * kDeg);
  for (std::size_t j = 1; j < z.size(); ++j) EXPECT_NEAR(z[j] - z[j - 1], 40 * kDeg / 31, 1e-12);
  EXPECT_THROW(uniform_beams(1, 0.0, 1.0), Error);
}

TEST(GradedBeams, SpanAndLimit) {
  const auto z = graded_beams(64, -23.6 * kDeg, 3.2 * kDeg, 1.03);
  EXPECT_EQ(z.front(), -23.6 * kDeg);
  EXPECT_EQ(z.back(), 3.2 * kDeg);
  const auto d = densities_from_centers(z);
  for (std::size_t j = 1; j + 1 < d.size(); ++j) EXPECT_GT(d[j], d[j - 1]);
  const auto near_uniform = graded_beams(16, -0.3, 0.1, 1.0 + 1e-12);
  const auto u = uniform_beams(16, -0.3, 0.1);
  for (std::size_t j = 0; j < u.size(); ++j) EXPECT_NEAR(near_uniform[j], u[j], 1e-9);
  EXPECT_THROW(graded_beams(8, 0.0, 1.0, 1.0), Error);
}

TEST(ScannerSpec, Validation) {
  EXPECT_THROW(validate(scanner({0.1, 0.0})), Error);
  EXPECT_THROW(validate(scanner({0.0, 0.1}, 0.7)), Error);
  EXPECT_THROW(validate(scanner({2.0})), Error);
  EXPECT_NO_THROW(validate(scanner({-0.1, 0.0})));
}

TEST(RenderScene, HitsLieOnBoxFaces) {
  SceneSpec scene;
  scene.objects.push_back({{12.0, 1.0, 6.0, 3.0, 0.4}, 2.5, 0});
  const auto r = render_scene(scanner(uniform_beams(32, -20 * kDeg, 5 * kDeg)), scene);
  std::size_t on_box = 0;
  for (std::size_t i = 0; i < r.cloud.size(); ++i) {
    const auto& p = r.cloud.points[i];
    if (r.object_ids[i] == 0) {
      ASSERT_LT(box_surface_residual(scene.objects[0], scene.ground_z, p), 1e-9);
      ++on_box;
    } else {
      ASSERT_NEAR(p.z, scene.ground_z, 1e-9);
    }
    ASSERT_LE(std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z), 80.0);
  }
  EXPECT_GT(on_box, 100u);
  ASSERT_EQ(r.labels.size(), 1u);
  EXPECT_DOUBLE_EQ(r.labels[0].center.z(), scene.ground_z + 1.25);
}

TEST(RenderScene, GroundOnly) {
  const auto r = render_scene(scanner(uniform_beams(8, -20 * kDeg, -5 * kDeg)), SceneSpec{});
  EXPECT_EQ(r.cloud.size(), 8u * 720u);
  for (const auto& p : r.cloud.points) EXPECT_NEAR(p.z, -1.73, 1e-12);
  for (int id : r.object_ids) EXPECT_EQ(id, -1);
}

TEST(RenderScene, UpwardBeamsMiss) {
  const auto r = render_scene(scanner({0.01, 0.02}), SceneSpec{});
  EXPECT_TRUE(r.cloud.empty());
}

TEST(RenderScene, BeamsRecoveredByClustering) {
  auto s = scanner(uniform_beams(32, -24 * kDeg, -2 * kDeg));
  s.noise_sigma = 0.02;
  SceneSpec scene;
  scene.seed = 4;
  scene.objects.push_back({{10.0, -3.0, 4.0, 1.7, 1.0}, 1.5, 0});
  const auto r = render_scene(s, scene);
  const auto m = cluster_beams(r.cloud, 32);
  EXPECT_EQ(m.assignments, r.beam);
  for (std::size_t j = 0; j < 32; ++j) EXPECT_NEAR(m.centers[j], s.beam_zeniths[j], 1e-4);
}

TEST(RenderScene, DeterministicAndSeeded) {
  auto s = scanner(uniform_beams(16, -20 * kDeg, -2 * kDeg));
  s.noise_sigma = 0.05;
  SceneSpec scene;
  scene.seed = 1;
  const auto a = render_scene(s, scene);
  EXPECT_EQ(a.cloud, render_scene(s, scene).cloud);
  scene.seed = 2;
  EXPECT_NE(a.cloud, render_scene(s, scene).cloud);
}

TEST(RenderScene, NearestSurfaceWins) {
  SceneSpec scene;
  scene.objects.push_back({{10.0, 0.0, 2.0, 2.0, 0.0}, 3.0, 0});
  scene.objects.push_back({{20.0, 0.0, 2.0, 2.0, 0.0}, 6.0, 1});
  const auto r = render_scene(scanner({-2 * kDeg}, 2 * pi / 3600), scene);
  for (std::size_t i = 0; i < r.cloud.size(); ++i) {
    if (std::abs(r.cloud.points[i].y) < 0.5 && r.cloud.points[i].x > 0) EXPECT_EQ(r.object_ids[i], 0);
  }
}

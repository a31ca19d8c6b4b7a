#include <gtest/gtest.h>

#include <random>

#include "rgbdfit/camera.hpp"

namespace rgbdfit {
namespace {

TEST(TanMaps, PrincipalPointIsOnAxis) {
  const CameraIntrinsics cam(500.0, 500.0, 320.0, 240.0, 640, 480);
  const auto maps = compute_tan_maps(cam);
  EXPECT_EQ(maps.tan_x(320, 240), 0.0);
  EXPECT_EQ(maps.tan_y(320, 240), 0.0);
}

TEST(TanMaps, OffsetEqualToFocalLengthGivesUnitTangent) {
  const CameraIntrinsics cam(500.0, 500.0, 320.0, 240.0, 1000, 480);
  const auto maps = compute_tan_maps(cam);
  EXPECT_DOUBLE_EQ(maps.tan_x(820, 10), 1.0);
}

TEST(TanMaps, DistortionOffsetIsAddedBeforeCentering) {
  Lattice<double> dx(640, 480, 0.25), dy(640, 480, 0.0);
  const CameraIntrinsics cam(525.0, 525.0, 319.5, 239.5, dx, dy);
  const auto maps = compute_tan_maps(cam);
  EXPECT_DOUBLE_EQ(maps.tan_x(100, 7), (100 + 0.25 - 319.5) / 525.0);
  EXPECT_DOUBLE_EQ(maps.tan_y(100, 7), (7 - 239.5) / 525.0);
}

TEST(TanMaps, ZeroOnPrincipalColumnAfterDistortion) {
  Lattice<double> dx(64, 48, 0.0), dy(64, 48, 0.0);
  dx(29, 5) = 3.0;  // pixel 29 + 3 lands on cx = 32
  const CameraIntrinsics cam(60.0, 60.0, 32.0, 24.0, dx, dy);
  const auto maps = compute_tan_maps(cam);
  EXPECT_EQ(maps.tan_x(29, 5), 0.0);
}

TEST(TanMaps, StrictlyIncreasingWithoutDistortion) {
  const auto maps = compute_tan_maps(default_intrinsics(64, 48));
  for (int y = 0; y < 48; ++y) {
    for (int x = 1; x < 64; ++x) ASSERT_LT(maps.tan_x(x - 1, y), maps.tan_x(x, y));
  }
  for (int x = 0; x < 64; ++x) {
    for (int y = 1; y < 48; ++y) ASSERT_LT(maps.tan_y(x, y - 1), maps.tan_y(x, y));
  }
}

TEST(Intrinsics, RejectsInvalidParameters) {
  EXPECT_THROW(CameraIntrinsics(0.0, 500.0, 1.0, 1.0, 10, 10), ConfigError);
  EXPECT_THROW(CameraIntrinsics(500.0, -1.0, 1.0, 1.0, 10, 10), ConfigError);
  EXPECT_THROW(CameraIntrinsics(500.0, 500.0, 10.0, 1.0, 10, 10), ConfigError);
  EXPECT_THROW(CameraIntrinsics(500.0, 500.0, 1.0, -0.5, 10, 10), ConfigError);
  EXPECT_THROW(CameraIntrinsics(500.0, 500.0, 1.0, 1.0, Lattice<double>(10, 10), Lattice<double>(10, 9)),
               DimensionMismatch);
}

TEST(BackProject, Examples) {
  const CameraIntrinsics cam(500.0, 500.0, 320.0, 240.0, 1000, 480);
  const auto maps = compute_tan_maps(cam);
  EXPECT_EQ(back_project({320, 240}, 2.0, maps), (Point3{0.0, 0.0, 2.0}));

  const auto p = back_project({820, 240}, 3.0, maps);
  EXPECT_DOUBLE_EQ(p.X, 3.0);
  EXPECT_EQ(p.Y, 0.0);
  EXPECT_EQ(p.Z, 3.0);

  // (420 - 320) * 2 / 500
  const auto q = back_project({420, 240}, 2.0, maps);
  EXPECT_DOUBLE_EQ(q.X, 0.4);
  EXPECT_EQ(q.Y, 0.0);
  EXPECT_EQ(q.Z, 2.0);
}

TEST(BackProject, Errors) {
  const auto maps = compute_tan_maps(default_intrinsics(32, 24));
  EXPECT_THROW(back_project({32, 0}, 1.0, maps), BoundsError);
  EXPECT_THROW(back_project({-1, 0}, 1.0, maps), BoundsError);
  EXPECT_THROW(back_project({3, 3}, 0.0, maps), InvalidDepthError);
  EXPECT_THROW(back_project({3, 3}, -2.0, maps), InvalidDepthError);
}

TEST(BackProject, RoundTripThroughForwardModel) {
  std::mt19937_64 rng(7);
  Lattice<double> dx(80, 60), dy(80, 60);
  std::uniform_real_distribution<double> off(-1.5, 1.5);
  for (double& v : dx.values()) v = off(rng);
  for (double& v : dy.values()) v = off(rng);
  const CameraIntrinsics cam(70.0, 72.0, 39.5, 29.0, dx, dy);
  const auto maps = compute_tan_maps(cam);
  std::uniform_int_distribution<int> px(0, 79), py(0, 59);
  std::uniform_real_distribution<double> z(0.3, 12.0);
  for (int i = 0; i < 2000; ++i) {
    const Pixel p{px(rng), py(rng)};
    const Point3 q = back_project(p, z(rng), maps);
    ASSERT_NEAR(cam.project_x(q, p), p.x, 1e-9);
    ASSERT_NEAR(cam.project_y(q, p), p.y, 1e-9);
  }
}

TEST(Noise, QuadraticDepthLaw) {
  const auto maps = compute_tan_maps(default_intrinsics(64, 48));
  const NoiseModel model;
  EXPECT_DOUBLE_EQ(model.slope_coefficient, 1.425e-3);
  EXPECT_DOUBLE_EQ(std::abs(NoiseModel::kDisparitySlope) / 2.0, NoiseModel::kKinectCoefficient);
  EXPECT_DOUBLE_EQ(noise_sigma(1.0, {0, 0}, maps, model).sigma_z, 1.425e-3);
  EXPECT_NEAR(noise_sigma(2.0, {0, 0}, maps, model).sigma_z, 5.7e-3, 1e-15);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> z(0.1, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double d = z(rng);
    EXPECT_EQ(noise_sigma(2.0 * d, {5, 5}, maps).sigma_z, 4.0 * noise_sigma(d, {5, 5}, maps).sigma_z);
  }
}

TEST(Noise, LateralSigmaScalesWithTangent) {
  const CameraIntrinsics cam(500.0, 500.0, 320.0, 240.0, 640, 480);
  const auto maps = compute_tan_maps(cam);
  const auto on_axis = noise_sigma(3.0, {320, 240}, maps);
  EXPECT_EQ(on_axis.sigma_x, 0.0);
  EXPECT_EQ(on_axis.sigma_y, 0.0);
  for (int x = 0; x < 640; x += 37) {
    const auto s = noise_sigma(2.5, {x, 100}, maps);
    EXPECT_DOUBLE_EQ(std::abs(s.sigma_x), std::abs(maps.tan_x(x, 100)) * s.sigma_z);
    if (std::abs(maps.tan_x(x, 100)) <= 0.5) EXPECT_LE(std::abs(s.sigma_x), 0.5 * s.sigma_z);
  }
  EXPECT_THROW(noise_sigma(0.0, {0, 0}, maps), InvalidDepthError);
}

TEST(Noise, FixedMode) {
  const auto maps = compute_tan_maps(default_intrinsics(8, 8));
  const auto m = NoiseModel::fixed(0.01);
  EXPECT_EQ(noise_sigma(1.0, {0, 0}, maps, m).sigma_z, 0.01);
  EXPECT_EQ(noise_sigma(4.0, {0, 0}, maps, m).sigma_z, 0.01);
  EXPECT_THROW(NoiseModel::fixed(0.0), ConfigError);
  EXPECT_THROW(NoiseModel::quadratic(-1.0), ConfigError);
}

}  // namespace
}  // namespace rgbdfit

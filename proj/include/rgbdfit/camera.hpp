#pragma once

#include <cmath>
#include <string>

#include "rgbdfit/error.hpp"
#include "rgbdfit/lattice.hpp"

namespace rgbdfit {

// Camera-frame point in meters; Z runs along the optical axis.
struct Point3 {
  double X = 0.0;
  double Y = 0.0;
  double Z = 0.0;

  bool operator==(const Point3&) const = default;
};

struct Pixel {
  int x = 0;
  int y = 0;
};

/// Pinhole intrinsics plus dense per-pixel distortion offsets.
///
/// Pixel centers sit at integer coordinates and are zero-indexed. The
/// distortion lattices hold the (delta_x, delta_y) adjustment added to the
/// pixel coordinate before back-projection; they default to zero.
class CameraIntrinsics {
 public:
  CameraIntrinsics(double fx, double fy, double cx, double cy, int width, int height)
      : CameraIntrinsics(fx, fy, cx, cy, Lattice<double>(width, height, 0.0),
                         Lattice<double>(width, height, 0.0)) {}

  CameraIntrinsics(double fx, double fy, double cx, double cy, Lattice<double> delta_x,
                   Lattice<double> delta_y)
      : fx_(fx),
        fy_(fy),
        cx_(cx),
        cy_(cy),
        delta_x_(std::move(delta_x)),
        delta_y_(std::move(delta_y)) {
    if (!(fx_ > 0.0) || !(fy_ > 0.0) || !std::isfinite(fx_) || !std::isfinite(fy_)) {
      throw ConfigError("focal lengths must be positive and finite");
    }
    if (delta_x_.width() <= 0 || delta_x_.height() <= 0) {
      throw ConfigError("image dimensions must be positive");
    }
    require_same_shape(delta_x_, delta_y_, "distortion maps");
    if (!(cx_ >= 0.0 && cx_ < width()) || !(cy_ >= 0.0 && cy_ < height())) {
      throw ConfigError("principal point outside the image");
    }
    for (double v : delta_x_.values()) {
      if (!std::isfinite(v)) throw ConfigError("non-finite distortion offset");
    }
    for (double v : delta_y_.values()) {
      if (!std::isfinite(v)) throw ConfigError("non-finite distortion offset");
    }
  }

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return delta_x_.width(); }
  int height() const { return delta_x_.height(); }
  const Lattice<double>& delta_x() const { return delta_x_; }
  const Lattice<double>& delta_y() const { return delta_y_; }

  // Forward model: x = fx * X / Z + cx - delta_x.
  double project_x(const Point3& p, Pixel at) const {
    return fx_ * p.X / p.Z + cx_ - delta_x_(at.x, at.y);
  }
  double project_y(const Point3& p, Pixel at) const {
    return fy_ * p.Y / p.Z + cy_ - delta_y_(at.x, at.y);
  }

 private:
  double fx_;
  double fy_;
  double cx_;
  double cy_;
  Lattice<double> delta_x_;
  Lattice<double> delta_y_;
};

// A 640x480 sensor with Kinect-like focal length.
inline CameraIntrinsics default_intrinsics(int width = 640, int height = 480) {
  return CameraIntrinsics(525.0, 525.0, (width - 1) / 2.0, (height - 1) / 2.0, width, height);
}

/// Per-pixel tangents of the viewing-ray angles. These depend only on the
/// intrinsics, so every depth-independent quantity of the range-space fits is
/// derived from them once.
struct TanAngleMaps {
  Lattice<double> tan_x;
  Lattice<double> tan_y;

  int width() const { return tan_x.width(); }
  int height() const { return tan_x.height(); }
};

inline TanAngleMaps compute_tan_maps(const CameraIntrinsics& cam) {
  TanAngleMaps maps{Lattice<double>(cam.width(), cam.height()),
                    Lattice<double>(cam.width(), cam.height())};
  for (int y = 0; y < cam.height(); ++y) {
    for (int x = 0; x < cam.width(); ++x) {
      maps.tan_x(x, y) = (x + cam.delta_x()(x, y) - cam.cx()) / cam.fx();
      maps.tan_y(x, y) = (y + cam.delta_y()(x, y) - cam.cy()) / cam.fy();
    }
  }
  return maps;
}

inline Point3 back_project(Pixel p, double depth, const TanAngleMaps& maps) {
  if (!maps.tan_x.contains(p.x, p.y)) {
    throw BoundsError("pixel (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") outside the image");
  }
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw InvalidDepthError("depth must be positive and finite, got " + std::to_string(depth));
  }
  return {depth * maps.tan_x(p.x, p.y), depth * maps.tan_y(p.x, p.y), depth};
}

/// Depth-dependent Gaussian sensor noise.
///
/// In quadratic mode sigma_Z = slope_coefficient * Z^2, the fit reported for
/// structured-light sensors of the Kinect class. Fixed mode uses a constant
/// sigma_Z instead and is offered for experiments that want homoscedastic
/// noise.
struct NoiseModel {
  enum class Mode { quadratic, fixed };

  // Linearized normalized-disparity slope m / (f_x b); the quadratic
  // coefficient below is half its magnitude.
  static constexpr double kDisparitySlope = -2.85e-3;
  static constexpr double kKinectCoefficient = 1.425e-3;

  Mode mode = Mode::quadratic;
  double slope_coefficient = kKinectCoefficient;  // 1/m
  double fixed_sigma = 0.0;                       // m

  static NoiseModel quadratic(double coefficient = kKinectCoefficient) {
    if (!(coefficient > 0.0)) throw ConfigError("noise coefficient must be positive");
    return {Mode::quadratic, coefficient, 0.0};
  }
  static NoiseModel fixed(double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("noise sigma must be positive");
    return {Mode::fixed, kKinectCoefficient, sigma};
  }

  double sigma_z(double depth) const {
    return mode == Mode::fixed ? fixed_sigma : slope_coefficient * depth * depth;
  }
};

struct NoiseSigma {
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double sigma_z = 0.0;
};

inline NoiseSigma noise_sigma(double depth, Pixel p, const TanAngleMaps& maps,
                              const NoiseModel& model = {}) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw InvalidDepthError("depth must be positive and finite, got " + std::to_string(depth));
  }
  if (!maps.tan_x.contains(p.x, p.y)) throw BoundsError("pixel outside the image");
  const double sz = model.sigma_z(depth);
  return {maps.tan_x(p.x, p.y) * sz, maps.tan_y(p.x, p.y) * sz, sz};
}

}  // namespace rgbdfit

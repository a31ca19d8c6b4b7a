#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "rgbdfit/camera.hpp"
#include "rgbdfit/error.hpp"
#include "rgbdfit/lattice.hpp"

namespace rgbdfit {

/// Organized depth image in meters. Invalid pixels are holes and are
/// excluded from every sum and fit.
struct DepthImage {
  Lattice<double> depth;
  Lattice<std::uint8_t> valid;

  DepthImage() = default;
  DepthImage(int width, int height) : depth(width, height, 0.0), valid(width, height, 0) {}

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }

  bool is_valid(int x, int y) const { return valid(x, y) != 0; }

  void set(int x, int y, double z) {
    if (z > 0.0 && std::isfinite(z)) {
      depth(x, y) = z;
      valid(x, y) = 1;
    } else {
      invalidate(x, y);
    }
  }
  void invalidate(int x, int y) {
    depth(x, y) = 0.0;
    valid(x, y) = 0;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid.values()) n += v != 0;
    return n;
  }
};

struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool operator==(const PixelRect&) const = default;
};

/// Implicit plane aX + bY + cZ + d = 0 with unit normal, optionally restricted
/// to a rectangle of pixels.
class GroundTruthPlane {
 public:
  GroundTruthPlane(double a, double b, double c, double d,
                   std::optional<PixelRect> mask = std::nullopt)
      : mask_(mask) {
    const double n = std::sqrt(a * a + b * b + c * c);
    if (!(n > 0.0) || !std::isfinite(n) || !std::isfinite(d)) {
      throw ConfigError("plane normal must be non-zero and finite");
    }
    a_ = a / n;
    b_ = b / n;
    c_ = c / n;
    d_ = d / n;
  }

  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }
  double d() const { return d_; }
  const std::optional<PixelRect>& mask() const { return mask_; }

  bool covers(int x, int y) const { return !mask_ || mask_->contains(x, y); }

  double signed_distance(const Point3& p) const { return a_ * p.X + b_ * p.Y + c_ * p.Z + d_; }

 private:
  double a_, b_, c_, d_;
  std::optional<PixelRect> mask_;
};

struct SyntheticScene {
  std::vector<GroundTruthPlane> planes;
};

struct Ray {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 1.0;
};

inline Ray ray_for_pixel(const TanAngleMaps& maps, Pixel p) {
  if (!maps.tan_x.contains(p.x, p.y)) throw BoundsError("pixel outside the image");
  return {maps.tan_x(p.x, p.y), maps.tan_y(p.x, p.y), 1.0};
}

// Depth at which the ray from the camera origin meets the plane, if it does
// so in front of the camera.
inline std::optional<double> intersect_plane(const Ray& ray, const GroundTruthPlane& plane) {
  const double denom = plane.a() * ray.dx + plane.b() * ray.dy + plane.c() * ray.dz;
  if (denom == 0.0) return std::nullopt;
  const double z = -plane.d() / denom * ray.dz;
  if (!(z > 0.0) || !std::isfinite(z)) return std::nullopt;
  return z;
}

inline constexpr std::uint8_t kNoPlane = 255;

struct RenderOptions {
  std::optional<NoiseModel> noise;  // nullopt renders noiseless depth
  double dropout = 0.0;             // fraction of valid pixels invalidated at random
  std::uint64_t seed = 0;
};

struct RenderedFrame {
  DepthImage depth;
  Lattice<std::uint8_t> labels;  // plane index, or kNoPlane
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent, reproducible stream per image row.
inline std::mt19937_64 row_stream(std::uint64_t seed, int row) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(row) + 1)));
}

}  // namespace detail

/// Ray-casts every pixel against the scene; the nearest positive intersection
/// wins. With noise enabled the surface point is displaced along its viewing
/// ray so that its depth component has standard deviation sigma_Z(Z). Because
/// the displacement is along the ray, the pixel of incidence is unchanged and
/// only the stored depth moves.
inline RenderedFrame render_scene(const SyntheticScene& scene, const TanAngleMaps& maps,
                                  const RenderOptions& opts = {}) {
  if (scene.planes.empty()) throw ConfigError("scene has no planes");
  if (scene.planes.size() >= kNoPlane) throw ConfigError("too many planes in scene");
  if (!(opts.dropout >= 0.0 && opts.dropout <= 1.0)) throw ConfigError("dropout must be in [0, 1]");

  const int w = maps.width();
  const int h = maps.height();
  RenderedFrame out{DepthImage(w, h), Lattice<std::uint8_t>(w, h, kNoPlane)};

  for (int y = 0; y < h; ++y) {
    auto rng = detail::row_stream(opts.seed, y);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int x = 0; x < w; ++x) {
      const Ray ray = ray_for_pixel(maps, {x, y});
      double best = std::numeric_limits<double>::infinity();
      std::uint8_t label = kNoPlane;
      for (std::size_t i = 0; i < scene.planes.size(); ++i) {
        const auto& plane = scene.planes[i];
        if (!plane.covers(x, y)) continue;
        if (auto z = intersect_plane(ray, plane); z && *z < best) {
          best = *z;
          label = static_cast<std::uint8_t>(i);
        }
      }
      if (label == kNoPlane) continue;
      double z = best;
      if (opts.noise) z += opts.noise->sigma_z(best) * gauss(rng);
      if (opts.dropout > 0.0 && unit(rng) < opts.dropout) continue;
      out.depth.set(x, y, z);
      if (out.depth.is_valid(x, y)) out.labels(x, y) = label;
    }
  }
  return out;
}

}  // namespace rgbdfit

#pragma once

// Generators and brute-force oracles shared by the unit and acceptance
// suites. Nothing here calls into the integral or fitting code paths it is
// used to check.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rgbdfit/camera.hpp"
#include "rgbdfit/integral.hpp"
#include "rgbdfit/linalg.hpp"
#include "rgbdfit/synth.hpp"

namespace rgbdfit::testing {

inline Rect random_rect(std::mt19937_64& rng, int w, int h, int min_side = 1) {
  std::uniform_int_distribution<int> wx(min_side, w), wy(min_side, h);
  const int rw = wx(rng), rh = wy(rng);
  const int x0 = std::uniform_int_distribution<int>(0, w - rw)(rng);
  const int y0 = std::uniform_int_distribution<int>(0, h - rh)(rng);
  return {x0, y0, x0 + rw, y0 + rh};
}

inline Lattice<double> random_lattice(std::mt19937_64& rng, int w, int h, double lo = -1.0, double hi = 1.0) {
  Lattice<double> out(w, h);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : out.values()) v = u(rng);
  return out;
}

inline Lattice<std::uint8_t> random_mask(std::mt19937_64& rng, int w, int h, double p_valid) {
  Lattice<std::uint8_t> out(w, h);
  std::bernoulli_distribution b(p_valid);
  for (auto& v : out.values()) v = b(rng) ? 1 : 0;
  return out;
}

// Depth image with random depths in [lo, hi] and random holes.
inline DepthImage random_depth(std::mt19937_64& rng, int w, int h, double p_valid = 0.9, double lo = 0.5,
                               double hi = 6.0) {
  DepthImage img(w, h);
  std::uniform_real_distribution<double> z(lo, hi);
  std::bernoulli_distribution b(p_valid);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = z(rng);
      if (b(rng)) img.set(x, y, v);
    }
  }
  return img;
}

// Masked prefix sum by a double loop over the whole prefix.
inline double naive_prefix(const Lattice<double>& v, const Lattice<std::uint8_t>& mask, int x, int y) {
  double s = 0.0;
  for (int j = 0; j < y; ++j) {
    for (int i = 0; i < x; ++i) {
      if (mask(i, j)) s += v(i, j);
    }
  }
  return s;
}

template <typename Fn>
double naive_rect_sum(const DepthImage& depth, const TanAngleMaps& maps, const Rect& r, Fn&& monomial) {
  double s = 0.0;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      if (depth.is_valid(x, y)) s += monomial(maps.tan_x(x, y), maps.tan_y(x, y), depth.depth(x, y));
    }
  }
  return s;
}

// Random unit-normal plane that the center of `window` sees at depth in
// [z_lo, z_hi] and that faces the camera with |cos| >= min_facing along the
// window's central ray. min_abs_c bounds |c| away from zero for explicit
// standard fits (planes near-parallel to the optical axis are excluded).
struct PlaneSpec {
  std::array<double, 4> coeffs;  // unit normal, offset
};

inline PlaneSpec random_visible_plane(std::mt19937_64& rng, const TanAngleMaps& maps, const Rect& window,
                                      double min_abs_c = 0.0, double z_lo = 1.0, double z_hi = 5.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> zd(z_lo, z_hi);
  const int cx = (window.x0 + window.x1) / 2;
  const int cy = (window.y0 + window.y1) / 2;
  const double tx = maps.tan_x(cx, cy), ty = maps.tan_y(cx, cy);
  const double rn = std::sqrt(tx * tx + ty * ty + 1.0);
  const std::array<double, 3> ray{tx / rn, ty / rn, 1.0 / rn};
  for (;;) {
    std::array<double, 3> n{g(rng), g(rng), g(rng)};
    const double nn = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    for (double& v : n) v /= nn;
    if (std::abs(n[2]) < min_abs_c) continue;
    const double facing = std::abs(n[0] * ray[0] + n[1] * ray[1] + n[2] * ray[2]);
    if (facing < 0.35) continue;
    const double z = zd(rng);
    const std::array<double, 3> p{tx * z, ty * z, z};
    const double d = -(n[0] * p[0] + n[1] * p[1] + n[2] * p[2]);
    // Every pixel of the window must hit the plane in front of the camera.
    bool ok = true;
    for (int y : {window.y0, window.y1 - 1}) {
      for (int x : {window.x0, window.x1 - 1}) {
        const double den = n[0] * maps.tan_x(x, y) + n[1] * maps.tan_y(x, y) + n[2];
        const double zz = -d / den;
        if (!(den != 0.0 && zz > 0.2 && zz < 20.0)) ok = false;
      }
    }
    if (ok) return {{n[0], n[1], n[2], d}};
  }
}

// Random rotation (uniform quaternion) and translation.
struct RigidMotion {
  Mat3 r{};
  Vec3 t{};

  Point3 apply(const Point3& p) const {
    return {r[0][0] * p.X + r[0][1] * p.Y + r[0][2] * p.Z + t[0],
            r[1][0] * p.X + r[1][1] * p.Y + r[1][2] * p.Z + t[1],
            r[2][0] * p.X + r[2][1] * p.Y + r[2][2] * p.Z + t[2]};
  }
  // Plane n.p + d = 0 maps to (R n).q + (d - (R n).t) = 0.
  Vec4 apply_plane(const Vec4& a) const {
    const Vec3 n{a[0], a[1], a[2]};
    const Vec3 rn = mul(r, n);
    return {rn[0], rn[1], rn[2], a[3] - dot(rn, t)};
  }
};

inline RigidMotion random_motion(std::mt19937_64& rng, double max_shift = 2.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-max_shift, max_shift);
  double q[4] = {g(rng), g(rng), g(rng), g(rng)};
  const double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& v : q) v /= qn;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  RigidMotion m;
  m.r = {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
          {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
          {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
  m.t = {u(rng), u(rng), u(rng)};
  return m;
}

// Random symmetric positive semi-definite matrix G^t G from a random G with
// `rows` rows; fewer than N rows gives a singular matrix.
template <std::size_t N>
Mat<N> random_psd(std::mt19937_64& rng, int rows = static_cast<int>(N) + 2, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat<N> m{};
  for (int k = 0; k < rows; ++k) {
    Vec<N> r;
    for (double& v : r) v = g(rng);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) m[i][j] += r[i] * r[j];
    }
  }
  return m;
}

template <std::size_t N>
Vec<N> random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec<N> v;
  for (double& x : v) x = g(rng);
  const double n = norm(v);
  for (double& x : v) x /= n;
  return v;
}

template <std::size_t N>
double rayleigh(const Mat<N>& s, const Vec<N>& v) {
  return dot(v, mul(s, v)) / dot(v, v);
}

// Brute-force best assignment of predicted clusters to ground-truth labels
// (one-to-one, by exhaustive permutation search) and the resulting pixel
// accuracy over pixels with a ground-truth label. Unlabeled predictions
// count as misses.
inline double matched_accuracy(const Lattice<int>& predicted, const Lattice<std::uint8_t>& truth, int k,
                               int n_truth) {
  std::vector<std::vector<long>> overlap(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(n_truth), 0));
  long total = 0;
  for (int y = 0; y < truth.height(); ++y) {
    for (int x = 0; x < truth.width(); ++x) {
      const int t = truth(x, y);
      if (t == kNoPlane) continue;
      ++total;
      const int p = predicted(x, y);
      if (p >= 0) ++overlap[static_cast<std::size_t>(p)][static_cast<std::size_t>(t)];
    }
  }
  // Assign each cluster to a truth label or to nothing; labels used once.
  long best = 0;
  std::vector<int> used(static_cast<std::size_t>(n_truth), 0);
  auto search = [&](auto&& self, int c, long acc) -> void {
    if (c == k) {
      best = std::max(best, acc);
      return;
    }
    self(self, c + 1, acc);
    for (int t = 0; t < n_truth; ++t) {
      if (used[static_cast<std::size_t>(t)]) continue;
      used[static_cast<std::size_t>(t)] = 1;
      self(self, c + 1, acc + overlap[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)]);
      used[static_cast<std::size_t>(t)] = 0;
    }
  };
  search(search, 0, 0);
  return total == 0 ? 0.0 : static_cast<double>(best) / static_cast<double>(total);
}

// Camera in the room looking into a three-wall corner; every pixel sees one
// of the walls. Planes are x = 0, y = 0, z = 0 of the room frame expressed in
// the camera frame.
inline SyntheticScene corner_scene(const Vec3& eye = {1.6, 1.3, 1.8}) {
  // Camera at `eye` in room coordinates, looking at (0, 0, 0).
  Vec3 fwd{-eye[0], -eye[1], -eye[2]};
  const double fn = norm(fwd);
  for (double& v : fwd) v /= fn;
  // Room "up" is +y; image y points down.
  const Vec3 up{0.0, 1.0, 0.0};
  Vec3 right{fwd[1] * up[2] - fwd[2] * up[1], fwd[2] * up[0] - fwd[0] * up[2], fwd[0] * up[1] - fwd[1] * up[0]};
  const double rn = norm(right);
  for (double& v : right) v /= rn;
  const Vec3 down{fwd[1] * right[2] - fwd[2] * right[1], fwd[2] * right[0] - fwd[0] * right[2],
                  fwd[0] * right[1] - fwd[1] * right[0]};
  // Room point p maps to camera q = (right.(p-eye), down.(p-eye), fwd.(p-eye)).
  // Room plane n.p = 0 becomes (Rn).q + n.eye = 0 with R rows right/down/fwd.
  SyntheticScene scene;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 n{};
    n[static_cast<std::size_t>(axis)] = 1.0;
    scene.planes.emplace_back(dot(right, n), dot(down, n), dot(fwd, n), dot(n, eye));
  }
  return scene;
}

}  // namespace rgbdfit::testing

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rgbdfit/camera.hpp"
#include "rgbdfit/error.hpp"
#include "rgbdfit/formulation.hpp"
#include "rgbdfit/integral.hpp"
#include "rgbdfit/linalg.hpp"
#include "rgbdfit/synth.hpp"

namespace rgbdfit {

/// Coefficients of aX + bY + cZ + d = 0 with ||(a, b, c, d)|| = 1 and the
/// first significant entry of (c, b, a, d) positive.
class ImplicitPlane {
 public:
  ImplicitPlane() = default;

  static ImplicitPlane canonical(const Vec4& v) {
    const double n = norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateFit("plane coefficients are zero or non-finite");
    ImplicitPlane p;
    const double inv = 1.0 / n;
    for (std::size_t i = 0; i < 4; ++i) p.alpha_[i] = v[i] * inv;
    const double eps = 1e-12;
    for (std::size_t i : {2u, 1u, 0u, 3u}) {
      if (std::abs(p.alpha_[i]) > eps) {
        if (p.alpha_[i] < 0.0) {
          for (double& x : p.alpha_) x = -x;
        }
        break;
      }
    }
    return p;
  }

  const Vec4& coeffs() const { return alpha_; }
  double a() const { return alpha_[0]; }
  double b() const { return alpha_[1]; }
  double c() const { return alpha_[2]; }
  double d() const { return alpha_[3]; }

  Vec3 unit_normal() const {
    const double n = std::sqrt(a() * a() + b() * b() + c() * c());
    return {a() / n, b() / n, c() / n};
  }
  // Offset after scaling the normal to unit length.
  double unit_offset() const { return d() / std::sqrt(a() * a() + b() * b() + c() * c()); }

  double residual(const Point3& p) const { return a() * p.X + b() * p.Y + c() * p.Z + d(); }

 private:
  Vec4 alpha_{0.0, 0.0, 1.0, 0.0};
};

// Angle between the planes' normals, ignoring orientation.
inline double normal_angle(const ImplicitPlane& p, const ImplicitPlane& q) {
  const Vec3 a = p.unit_normal();
  const Vec3 b = q.unit_normal();
  const Vec3 cross{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  return std::atan2(norm(cross), std::abs(dot(a, b)));
}

enum class PlaneSpace { standard, rgbd };

/// Explicit plane. Standard space: Z = aX + bY + c. Range space:
/// 1/Z = a tan_x + b tan_y + c.
struct ExplicitPlane {
  Vec3 alpha{};
  PlaneSpace space = PlaneSpace::standard;
};

inline ImplicitPlane explicit_to_implicit(const ExplicitPlane& p) {
  const auto& [a, b, c] = p.alpha;
  if (p.space == PlaneSpace::standard) return ImplicitPlane::canonical({a, b, -1.0, c});
  // Multiplying through by Z gives aX + bY + cZ - 1 = 0.
  return ImplicitPlane::canonical({a, b, c, -1.0});
}

// Symmetric 4x4 scatter matrix M^t M with the sample count.
struct Scatter4 {
  Mat4 m{};
  long n = 0;
};

// Normal equations of an explicit fit: M^t M, M^t b and b^t b.
struct Scatter3 {
  Mat3 m{};
  Vec3 rhs{};
  double rhs_sq = 0.0;
  long n = 0;
};

struct FitResult {
  Formulation formulation = Formulation::implicit_standard;
  ImplicitPlane plane;
  std::optional<ExplicitPlane> explicit_plane;
  // Root-mean-square of the fitted objective's own residual.
  double rms = 0.0;
  long n_points = 0;
  // Smallest scatter eigenvalue (implicit fits only).
  double lambda = std::numeric_limits<double>::quiet_NaN();
  // Ambiguous minimum eigenvector or rank-deficient normal equations.
  bool degenerate = false;
};

// One point of a fitting window: (X, Y, Z) for standard formulations,
// (tan_x, tan_y, Z) for range-space formulations.
struct Sample {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

namespace detail {

inline void require_samples(long n, Formulation f) {
  if (n < min_samples(f)) {
    throw InsufficientSamples(std::string(to_string(f)) + " needs at least " +
                              std::to_string(min_samples(f)) + " valid samples, got " +
                              std::to_string(n));
  }
}

template <std::size_t N>
void add_outer(Mat<N>& m, const Vec<N>& r) {
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i; j < N; ++j) m[i][j] += r[i] * r[j];
  }
}

template <std::size_t N>
void mirror_upper(Mat<N>& m) {
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < i; ++j) m[i][j] = m[j][i];
  }
}

// Monomial row of the implicit objective for one sample.
inline Vec4 implicit_row(const Sample& s, Formulation f) {
  if (f == Formulation::implicit_standard) return {s.u, s.v, s.z, 1.0};
  return {s.u, s.v, 1.0, 1.0 / s.z};
}

}  // namespace detail

inline Scatter4 accumulate_implicit_naive(std::span<const Sample> samples, Formulation f) {
  if (!is_implicit(f)) throw ConfigError("implicit scatter requested for an explicit formulation");
  detail::require_samples(static_cast<long>(samples.size()), f);
  Scatter4 s;
  for (const auto& p : samples) detail::add_outer(s.m, detail::implicit_row(p, f));
  detail::mirror_upper(s.m);
  s.n = static_cast<long>(samples.size());
  return s;
}

inline Scatter3 accumulate_explicit_naive(std::span<const Sample> samples, Formulation f) {
  if (is_implicit(f)) throw ConfigError("explicit scatter requested for an implicit formulation");
  detail::require_samples(static_cast<long>(samples.size()), f);
  Scatter3 s;
  const bool rgbd = f == Formulation::explicit_rgbd;
  for (const auto& p : samples) {
    const Vec3 row{p.u, p.v, 1.0};
    const double target = rgbd ? 1.0 / p.z : p.z;
    detail::add_outer(s.m, row);
    for (std::size_t i = 0; i < 3; ++i) s.rhs[i] += target * row[i];
    s.rhs_sq += target * target;
  }
  detail::mirror_upper(s.m);
  s.n = static_cast<long>(samples.size());
  return s;
}

/// Valid pixels of a window as fitting samples for the formulation.
inline std::vector<Sample> gather_samples(const DepthImage& depth, const TanAngleMaps& maps, const Rect& r,
                                          Formulation f) {
  require_same_shape(depth.depth, maps.tan_x, "depth image vs tangent maps");
  require_within(r, depth.width(), depth.height());
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(r.area()));
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      if (!depth.is_valid(x, y)) continue;
      const double z = depth.depth(x, y);
      const double tx = maps.tan_x(x, y);
      const double ty = maps.tan_y(x, y);
      if (is_rgbd(f)) {
        out.push_back({tx, ty, z});
      } else {
        out.push_back({z * tx, z * ty, z});
      }
    }
  }
  return out;
}

/// Windowed scatter accumulation straight from the image, one pass over the
/// window. Standard formulations back-project each sample (two multiplies);
/// range-space formulations take tangents from the maps and divide once for
/// 1/Z.
inline Scatter4 naive_implicit_scatter(const DepthImage& depth, const TanAngleMaps& maps, const Rect& r,
                                       Formulation f) {
  require_within(r, depth.width(), depth.height());
  Scatter4 s;
  long n = 0;
  for (int y = r.y0; y < r.y1; ++y) {
    const auto z = depth.depth.row(y);
    const auto ok = depth.valid.row(y);
    const auto tx = maps.tan_x.row(y);
    const auto ty = maps.tan_y.row(y);
    for (int x = r.x0; x < r.x1; ++x) {
      if (!ok[x]) continue;
      Vec4 row;
      if (f == Formulation::implicit_standard) {
        row = {z[x] * tx[x], z[x] * ty[x], z[x], 1.0};
      } else {
        row = {tx[x], ty[x], 1.0, 1.0 / z[x]};
      }
      detail::add_outer(s.m, row);
      ++n;
    }
  }
  detail::require_samples(n, f);
  detail::mirror_upper(s.m);
  s.n = n;
  return s;
}

inline Scatter3 naive_explicit_scatter(const DepthImage& depth, const TanAngleMaps& maps, const Rect& r,
                                       Formulation f) {
  require_within(r, depth.width(), depth.height());
  Scatter3 s;
  long n = 0;
  const bool rgbd = f == Formulation::explicit_rgbd;
  for (int y = r.y0; y < r.y1; ++y) {
    const auto z = depth.depth.row(y);
    const auto ok = depth.valid.row(y);
    const auto tx = maps.tan_x.row(y);
    const auto ty = maps.tan_y.row(y);
    for (int x = r.x0; x < r.x1; ++x) {
      if (!ok[x]) continue;
      Vec3 row;
      double target;
      if (rgbd) {
        row = {tx[x], ty[x], 1.0};
        target = 1.0 / z[x];
      } else {
        row = {z[x] * tx[x], z[x] * ty[x], 1.0};
        target = z[x];
      }
      detail::add_outer(s.m, row);
      for (std::size_t i = 0; i < 3; ++i) s.rhs[i] += target * row[i];
      s.rhs_sq += target * target;
      ++n;
    }
  }
  detail::require_samples(n, f);
  detail::mirror_upper(s.m);
  s.n = n;
  return s;
}

namespace detail {

// Depth-independent tangent block for the valid pixels of r: the constant
// sums minus whatever falls on holes of this frame.
inline Mat3 tangent_block(const ChannelStack& frame, const ChannelStack& constant, const Rect& r, long n) {
  double txx = constant.sum(Monomial::Tx2, r);
  double txy = constant.sum(Monomial::TxTy, r);
  double tyy = constant.sum(Monomial::Ty2, r);
  double tx = constant.sum(Monomial::Tx, r);
  double ty = constant.sum(Monomial::Ty, r);
  if (n != r.area()) {
    txx -= frame.sum(Monomial::HoleTx2, r);
    txy -= frame.sum(Monomial::HoleTxTy, r);
    tyy -= frame.sum(Monomial::HoleTy2, r);
    tx -= frame.sum(Monomial::HoleTx, r);
    ty -= frame.sum(Monomial::HoleTy, r);
  }
  const double one = static_cast<double>(n);
  return {{{txx, txy, tx}, {txy, tyy, ty}, {tx, ty, one}}};
}

inline long checked_count(const ChannelStack& frame, const Rect& r, Formulation f) {
  require_within(r, frame.width(), frame.height());
  const long n = std::lround(frame.sum(Monomial::Count, r));
  require_samples(n, f);
  return n;
}

inline void require_constant(const ChannelStack* constant, const ChannelStack& frame) {
  if (constant == nullptr) throw ConfigError("range-space fits need the constant channel stack");
  if (constant->width() != frame.width() || constant->height() != frame.height()) {
    throw DimensionMismatch("constant and per-frame channel stacks differ in size");
  }
}

}  // namespace detail

/// Implicit scatter matrix for a rectangle, one box sum per distinct entry.
/// Range-space formulations read their tangent block from the constant stack.
inline Scatter4 implicit_scatter_from_integrals(const ChannelStack& frame, const ChannelStack* constant,
                                                const Rect& r, Formulation f) {
  const long n = detail::checked_count(frame, r, f);
  Scatter4 s;
  s.n = n;
  auto& m = s.m;
  if (f == Formulation::implicit_standard) {
    const double xx = frame.sum(Monomial::X2, r), xy = frame.sum(Monomial::XY, r);
    const double xz = frame.sum(Monomial::XZ, r), x = frame.sum(Monomial::X, r);
    const double yy = frame.sum(Monomial::Y2, r), yz = frame.sum(Monomial::YZ, r);
    const double y = frame.sum(Monomial::Y, r), zz = frame.sum(Monomial::Z2, r);
    const double z = frame.sum(Monomial::Z, r);
    m = {{{xx, xy, xz, x}, {xy, yy, yz, y}, {xz, yz, zz, z}, {x, y, z, static_cast<double>(n)}}};
  } else if (f == Formulation::implicit_rgbd) {
    detail::require_constant(constant, frame);
    const Mat3 t = detail::tangent_block(frame, *constant, r, n);
    const double wx = frame.sum(Monomial::TxInvZ, r), wy = frame.sum(Monomial::TyInvZ, r);
    const double w = frame.sum(Monomial::InvZ, r), ww = frame.sum(Monomial::InvZ2, r);
    m = {{{t[0][0], t[0][1], t[0][2], wx},
          {t[1][0], t[1][1], t[1][2], wy},
          {t[2][0], t[2][1], t[2][2], w},
          {wx, wy, w, ww}}};
  } else {
    throw ConfigError("implicit scatter requested for an explicit formulation");
  }
  return s;
}

inline Scatter3 explicit_scatter_from_integrals(const ChannelStack& frame, const ChannelStack* constant,
                                                const Rect& r, Formulation f) {
  const long n = detail::checked_count(frame, r, f);
  Scatter3 s;
  s.n = n;
  if (f == Formulation::explicit_standard) {
    const double xx = frame.sum(Monomial::X2, r), xy = frame.sum(Monomial::XY, r);
    const double x = frame.sum(Monomial::X, r), yy = frame.sum(Monomial::Y2, r);
    const double y = frame.sum(Monomial::Y, r);
    s.m = {{{xx, xy, x}, {xy, yy, y}, {x, y, static_cast<double>(n)}}};
    s.rhs = {frame.sum(Monomial::XZ, r), frame.sum(Monomial::YZ, r), frame.sum(Monomial::Z, r)};
    s.rhs_sq = frame.sum(Monomial::Z2, r);
  } else if (f == Formulation::explicit_rgbd) {
    detail::require_constant(constant, frame);
    s.m = detail::tangent_block(frame, *constant, r, n);
    s.rhs = {frame.sum(Monomial::TxInvZ, r), frame.sum(Monomial::TyInvZ, r), frame.sum(Monomial::InvZ, r)};
    s.rhs_sq = frame.sum(Monomial::InvZ2, r);
  } else {
    throw ConfigError("explicit scatter requested for an implicit formulation");
  }
  return s;
}

namespace detail {

inline FitResult fit_implicit(const Scatter4& s, Formulation f) {
  require_samples(s.n, f);
  const auto eig = smallest_eigenvector(s.m);
  FitResult r;
  r.formulation = f;
  r.n_points = s.n;
  r.lambda = eig.value;
  r.rms = std::sqrt(std::max(eig.value, 0.0) / static_cast<double>(s.n));
  r.degenerate = !(eig.gap > 1e-12 * std::abs(trace(s.m)));
  r.plane = ImplicitPlane::canonical(eig.vector);
  return r;
}

// Minimizes the perpendicular residual under |(a, b, c)| = 1. Eliminating d
// from the raw scatter leaves the 3x3 Schur complement, whose smallest
// eigenvector is the normal; unlike |(a, b, c, d)| = 1 this commutes with
// rigid motions of the samples.
inline FitResult fit_perpendicular(const Scatter4& s) {
  const Formulation f = Formulation::implicit_standard;
  require_samples(s.n, f);
  const long double n = s.m[3][3];
  Mat3 c{};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      c[i][j] = static_cast<double>(s.m[i][j] - static_cast<long double>(s.m[i][3]) * s.m[j][3] / n);
    }
  }
  const auto eig = smallest_eigenvector(c);
  const Vec3& normal = eig.vector;
  const double d = -static_cast<double>(
      (static_cast<long double>(normal[0]) * s.m[0][3] + static_cast<long double>(normal[1]) * s.m[1][3] +
       static_cast<long double>(normal[2]) * s.m[2][3]) / n);
  const Vec4 alpha{normal[0], normal[1], normal[2], d};
  long double sse = 0.0L;
  for (std::size_t i = 0; i < 4; ++i) {
    long double row = 0.0L;
    for (std::size_t j = 0; j < 4; ++j) row += static_cast<long double>(s.m[i][j]) * alpha[j];
    sse += row * alpha[i];
  }
  FitResult r;
  r.formulation = f;
  r.n_points = s.n;
  r.lambda = std::max(static_cast<double>(sse), 0.0);
  r.rms = std::sqrt(r.lambda / static_cast<double>(s.n));
  r.degenerate = !(eig.gap > 1e-12 * std::abs(trace(c)));
  r.plane = ImplicitPlane::canonical(alpha);
  return r;
}

inline double explicit_rms(const Scatter3& s, const Vec3& alpha) {
  const double sse = s.rhs_sq - 2.0 * dot(alpha, s.rhs) + dot(alpha, mul(s.m, alpha));
  return std::sqrt(std::max(sse, 0.0) / static_cast<double>(s.n));
}

inline FitResult finish_explicit(const Scatter3& s, const Vec3& alpha, Formulation f, bool degenerate) {
  FitResult r;
  r.formulation = f;
  r.n_points = s.n;
  r.degenerate = degenerate;
  r.explicit_plane = ExplicitPlane{
      alpha, f == Formulation::explicit_rgbd ? PlaneSpace::rgbd : PlaneSpace::standard};
  r.rms = explicit_rms(s, alpha);
  r.plane = explicit_to_implicit(*r.explicit_plane);
  return r;
}

inline FitResult fit_explicit(const Scatter3& s, Formulation f, const Cholesky3* factor) {
  require_samples(s.n, f);
  const Cholesky3 local = factor ? Cholesky3{} : Cholesky3::factor(s.m);
  const Cholesky3& chol = factor ? *factor : local;
  if (chol.ok()) return finish_explicit(s, chol.solve(s.rhs), f, false);
  // Rank-deficient: report the minimum-norm solution and flag it.
  return finish_explicit(s, pseudo_solve3(s.m, s.rhs), f, true);
}

}  // namespace detail

/// Perpendicular-distance fit from the (X, Y, Z, 1) scatter matrix with a
/// unit normal. lambda is the perpendicular sum of squares and
/// rms = sqrt(lambda / N) is in meters.
inline FitResult fit_implicit_standard(const Scatter4& s) {
  return detail::fit_perpendicular(s);
}

/// Range-space implicit fit. The eigenvector of the (tan_x, tan_y, 1, 1/Z)
/// scatter matrix is directly (a, b, c, d) of aX + bY + cZ + d = 0; its rms
/// is measured in the range-space algebraic metric.
inline FitResult fit_implicit_rgbd(const Scatter4& s) {
  return detail::fit_implicit(s, Formulation::implicit_rgbd);
}

/// Z = aX + bY + c by the normal equations.
inline FitResult fit_explicit_standard(const Scatter3& s) {
  return detail::fit_explicit(s, Formulation::explicit_standard, nullptr);
}

/// 1/Z = a tan_x + b tan_y + c. The scatter matrix depends only on the
/// intrinsics, so a factorization computed once per rectangle may be passed
/// in and reused for every frame.
inline FitResult fit_explicit_rgbd(const Scatter3& s, const Cholesky3* factor = nullptr) {
  return detail::fit_explicit(s, Formulation::explicit_rgbd, factor);
}

inline FitResult fit_scatter(const Scatter4& s, Formulation f) {
  if (f == Formulation::implicit_standard) return fit_implicit_standard(s);
  if (f == Formulation::implicit_rgbd) return fit_implicit_rgbd(s);
  throw ConfigError("4x4 scatter given to an explicit formulation");
}

inline FitResult fit_scatter(const Scatter3& s, Formulation f) {
  if (f == Formulation::explicit_standard) return fit_explicit_standard(s);
  if (f == Formulation::explicit_rgbd) return fit_explicit_rgbd(s);
  throw ConfigError("3x3 scatter given to an implicit formulation");
}

/// Range-space explicit normal matrix and its factorization for one hole-free
/// rectangle. Valid for every frame from the same camera.
struct RectFactor {
  Rect rect;
  Mat3 m{};
  Cholesky3 chol;
};

inline RectFactor prepare_explicit_rgbd(const ChannelStack& constant, const Rect& r) {
  require_within(r, constant.width(), constant.height());
  RectFactor f;
  f.rect = r;
  f.m = {{{constant.sum(Monomial::Tx2, r), constant.sum(Monomial::TxTy, r), constant.sum(Monomial::Tx, r)},
          {constant.sum(Monomial::TxTy, r), constant.sum(Monomial::Ty2, r), constant.sum(Monomial::Ty, r)},
          {constant.sum(Monomial::Tx, r), constant.sum(Monomial::Ty, r), constant.sum(Monomial::Count, r)}}};
  f.chol = Cholesky3::factor(f.m);
  return f;
}

/// Per-frame work of a range-space explicit fit with a prepared factor: three
/// box sums for M^t b, one for the residual and a triangular solve. Falls
/// back to a full fit when the rectangle contains holes in this frame.
inline FitResult fit_explicit_rgbd_prepared(const ChannelStack& frame, const ChannelStack& constant,
                                            const RectFactor& factor) {
  const Rect& r = factor.rect;
  const long n = detail::checked_count(frame, r, Formulation::explicit_rgbd);
  if (n != r.area() || !factor.chol.ok()) {
    return fit_explicit_rgbd(explicit_scatter_from_integrals(frame, &constant, r, Formulation::explicit_rgbd));
  }
  Scatter3 s;
  s.n = n;
  s.m = factor.m;
  s.rhs = {frame.sum(Monomial::TxInvZ, r), frame.sum(Monomial::TyInvZ, r), frame.sum(Monomial::InvZ, r)};
  s.rhs_sq = frame.sum(Monomial::InvZ2, r);
  return detail::finish_explicit(s, factor.chol.solve(s.rhs), Formulation::explicit_rgbd, false);
}

struct RectHash {
  std::size_t operator()(const Rect& r) const {
    std::size_t h = std::hash<int>{}(r.x0);
    for (int v : {r.y0, r.x1, r.y1}) h = h * 1000003u ^ std::hash<int>{}(v);
    return h;
  }
};

/// Range-space explicit factorizations keyed by rectangle, shared across
/// frames of one camera. Not thread-safe.
class FactorCache {
 public:
  explicit FactorCache(const ChannelStack& constant) : constant_(&constant) {}

  const RectFactor& get(const Rect& r) {
    auto it = cache_.find(r);
    if (it == cache_.end()) it = cache_.emplace(r, prepare_explicit_rgbd(*constant_, r)).first;
    return it->second;
  }
  const ChannelStack& constant() const { return *constant_; }
  std::size_t size() const { return cache_.size(); }

 private:
  const ChannelStack* constant_;
  std::unordered_map<Rect, RectFactor, RectHash> cache_;
};

/// Fits rectangles of one frame with a fixed formulation and backend.
///
/// The integral backend needs the frame's channel stack (and, for range-space
/// formulations, the constant stack); the naive backend reads the depth image
/// directly. A FactorCache, when given, short-cuts range-space explicit fits.
class PlaneFitter {
 public:
  PlaneFitter(Formulation f, Backend b, const DepthImage& depth, const TanAngleMaps& maps,
              const ChannelStack* frame = nullptr, const ChannelStack* constant = nullptr,
              FactorCache* cache = nullptr)
      : formulation_(f), backend_(b), depth_(&depth), maps_(&maps), frame_(frame), constant_(constant),
        cache_(cache) {
    require_same_shape(depth.depth, maps.tan_x, "depth image vs tangent maps");
    if (b == Backend::integral) {
      if (frame_ == nullptr) throw ConfigError("integral backend needs a per-frame channel stack");
      if (is_rgbd(f)) detail::require_constant(constant_, *frame_);
    }
  }

  Formulation formulation() const { return formulation_; }
  Backend backend() const { return backend_; }

  FitResult fit(const Rect& r) const {
    if (backend_ == Backend::naive) {
      if (is_implicit(formulation_)) return fit_scatter(naive_implicit_scatter(*depth_, *maps_, r, formulation_), formulation_);
      return fit_scatter(naive_explicit_scatter(*depth_, *maps_, r, formulation_), formulation_);
    }
    if (is_implicit(formulation_)) {
      return fit_scatter(implicit_scatter_from_integrals(*frame_, constant_, r, formulation_), formulation_);
    }
    if (formulation_ == Formulation::explicit_rgbd && cache_ != nullptr) {
      require_within(r, frame_->width(), frame_->height());
      return fit_explicit_rgbd_prepared(*frame_, *constant_, cache_->get(r));
    }
    return fit_scatter(explicit_scatter_from_integrals(*frame_, constant_, r, formulation_), formulation_);
  }

  // Valid samples in r, from whichever source the backend uses.
  long valid_count(const Rect& r) const {
    require_within(r, depth_->width(), depth_->height());
    if (backend_ == Backend::integral) return std::lround(frame_->sum(Monomial::Count, r));
    long n = 0;
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) n += depth_->is_valid(x, y);
    }
    return n;
  }

 private:
  Formulation formulation_;
  Backend backend_;
  const DepthImage* depth_;
  const TanAngleMaps* maps_;
  const ChannelStack* frame_;
  const ChannelStack* constant_;
  FactorCache* cache_;
};

inline constexpr const char* kFitCsvHeader = "formulation,backend,x0,y0,x1,y1,a,b,c,d,lambda,rms,n_points";

inline void write_fit_csv(std::ostream& os, const FitResult& r, Backend b, const Rect& rect) {
  const auto old = os.precision(17);
  os << to_string(r.formulation) << ',' << to_string(b) << ',' << rect.x0 << ',' << rect.y0 << ','
     << rect.x1 << ',' << rect.y1 << ',' << r.plane.a() << ',' << r.plane.b() << ',' << r.plane.c() << ','
     << r.plane.d() << ',' << r.lambda << ',' << r.rms << ',' << r.n_points << '\n';
  os.precision(old);
}

}  // namespace rgbdfit

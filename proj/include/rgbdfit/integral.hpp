#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rgbdfit/camera.hpp"
#include "rgbdfit/error.hpp"
#include "rgbdfit/formulation.hpp"
#include "rgbdfit/lattice.hpp"
#include "rgbdfit/synth.hpp"

namespace rgbdfit {

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool within(int w, int h) const { return 0 <= x0 && x0 <= x1 && x1 <= w && 0 <= y0 && y0 <= y1 && y1 <= h; }

  bool operator==(const Rect&) const = default;
};

inline std::string to_string(const Rect& r) {
  return std::to_string(r.x0) + "," + std::to_string(r.y0) + "," + std::to_string(r.x1) + "," +
         std::to_string(r.y1);
}

inline void require_within(const Rect& r, int w, int h) {
  if (!r.within(w, h)) {
    throw BoundsError("rect " + to_string(r) + " outside " + std::to_string(w) + "x" +
                      std::to_string(h) + " image");
  }
}

/// Summed-area table with a zero first row and column: entry (x, y) holds the
/// sum of source pixels in [0, x) x [0, y).
class IntegralImage {
 public:
  IntegralImage() = default;
  IntegralImage(int width, int height, std::string label = {})
      : sums_(width + 1, height + 1, 0.0), label_(std::move(label)) {}

  // Source image dimensions.
  int width() const { return sums_.width() - 1; }
  int height() const { return sums_.height() - 1; }
  const std::string& label() const { return label_; }

  double operator()(int x, int y) const { return sums_(x, y); }
  const Lattice<double>& table() const { return sums_; }
  Lattice<double>& table() { return sums_; }

  // Four-lookup rectangle sum without bounds checks.
  double sum(const Rect& r) const {
    const std::size_t stride = static_cast<std::size_t>(sums_.width());
    const double* t = sums_.values().data();
    const std::size_t top = static_cast<std::size_t>(r.y0) * stride;
    const std::size_t bottom = static_cast<std::size_t>(r.y1) * stride;
    return t[bottom + r.x1] - t[bottom + r.x0] - t[top + r.x1] + t[top + r.x0];
  }

 private:
  Lattice<double> sums_;
  std::string label_;
};

/// Builds a summed-area table of value(i) over a W x H grid, where i is the
/// row-major source index. Pixels with mask[i] == 0 contribute nothing.
template <typename ValueFn>
IntegralImage integrate(int width, int height, const std::uint8_t* mask, ValueFn&& value,
                        std::string label = {}) {
  IntegralImage out(width, height, std::move(label));
  const std::size_t stride = static_cast<std::size_t>(width) + 1;
  double* t = out.table().values().data();
  for (int y = 0; y < height; ++y) {
    const std::size_t src = static_cast<std::size_t>(y) * static_cast<std::size_t>(width);
    const double* above = t + static_cast<std::size_t>(y) * stride;
    double* row = t + static_cast<std::size_t>(y + 1) * stride;
    double running = 0.0;
    for (int x = 0; x < width; ++x) {
      const std::size_t i = src + static_cast<std::size_t>(x);
      running += (mask == nullptr || mask[i]) ? value(i) : 0.0;
      row[x + 1] = above[x + 1] + running;
    }
  }
  return out;
}

inline IntegralImage build_integral(const Lattice<double>& channel, const Lattice<std::uint8_t>& mask,
                                    std::string label = {}) {
  require_same_shape(channel, mask, "build_integral");
  const double* v = channel.values().data();
  return integrate(channel.width(), channel.height(), mask.values().data(),
                   [v](std::size_t i) { return v[i]; }, std::move(label));
}

inline double box_sum(const IntegralImage& image, const Rect& r) {
  require_within(r, image.width(), image.height());
  return image.sum(r);
}

// Every monomial a scatter matrix can need. Tx/Ty are the tangent maps,
// InvZ is 1/Z. Hole* channels accumulate tangent monomials over invalid
// pixels so constant sums can be corrected for holes.
enum class Monomial : std::uint8_t {
  X2, XY, XZ, X, Y2, YZ, Y, Z2, Z,
  Tx2, TxTy, Ty2, Tx, Ty,
  TxInvZ, TyInvZ, InvZ, InvZ2,
  Count,
  HoleTx2, HoleTxTy, HoleTy2, HoleTx, HoleTy,
  kCount_
};

inline constexpr std::size_t kMonomialCount = static_cast<std::size_t>(Monomial::kCount_);

inline std::string_view monomial_name(Monomial m) {
  static constexpr std::array<std::string_view, kMonomialCount> names = {
      "X2", "XY", "XZ", "X", "Y2", "YZ", "Y", "Z2", "Z",
      "tanx2", "tanx_tany", "tany2", "tanx", "tany",
      "tanx_invz", "tany_invz", "invz", "invz2",
      "count",
      "hole_tanx2", "hole_tanx_tany", "hole_tany2", "hole_tanx", "hole_tany"};
  return names[static_cast<std::size_t>(m)];
}

// constant channels depend only on the intrinsics and can be reused across
// frames; per_frame channels must be rebuilt for every depth image.
enum class ChannelKind { constant, per_frame };

// scatter: an entry of the formulation's scatter matrix (or M^t b).
// residual: the b^t b term needed only to report explicit-fit residuals.
enum class ChannelRole { scatter, residual, count, hole };

struct Channel {
  Monomial monomial;
  ChannelKind kind;
  ChannelRole role;
  int cost;  // arithmetic ops per pixel to form the monomial before integration
  IntegralImage image;
};

class ChannelStack {
 public:
  ChannelStack() { index_.fill(-1); }
  ChannelStack(int width, int height) : width_(width), height_(height) { index_.fill(-1); }

  int width() const { return width_; }
  int height() const { return height_; }

  void add(Channel ch) {
    if (ch.image.width() != width_ || ch.image.height() != height_) {
      throw DimensionMismatch("channel " + std::string(monomial_name(ch.monomial)) +
                              " does not match stack dimensions");
    }
    auto& slot = index_[static_cast<std::size_t>(ch.monomial)];
    if (slot >= 0) {
      channels_[static_cast<std::size_t>(slot)] = std::move(ch);
    } else {
      slot = static_cast<int>(channels_.size());
      channels_.push_back(std::move(ch));
    }
  }

  bool has(Monomial m) const { return index_[static_cast<std::size_t>(m)] >= 0; }

  const Channel& channel(Monomial m) const {
    const int i = index_[static_cast<std::size_t>(m)];
    if (i < 0) throw ConfigError("channel " + std::string(monomial_name(m)) + " not in stack");
    return channels_[static_cast<std::size_t>(i)];
  }
  const IntegralImage& image(Monomial m) const { return channel(m).image; }

  // Unchecked rectangle sum; callers validate the rect once.
  double sum(Monomial m, const Rect& r) const {
    return channels_[static_cast<std::size_t>(index_[static_cast<std::size_t>(m)])].image.sum(r);
  }
  double box_sum(Monomial m, const Rect& r) const {
    require_within(r, width_, height_);
    return image(m).sum(r);
  }

  const std::vector<Channel>& channels() const { return channels_; }

  int count(ChannelKind kind, ChannelRole role) const {
    int n = 0;
    for (const auto& c : channels_) n += c.kind == kind && c.role == role;
    return n;
  }

  bool has_holes() const { return has(Monomial::HoleTx); }

  // Arithmetic ops per pixel to build the scatter channels of one kind: each
  // table costs its monomial cost plus 4 for the running sum.
  int build_ops_per_pixel(ChannelKind kind) const {
    int ops = 0;
    for (const auto& c : channels_) {
      if (c.kind == kind && c.role == ChannelRole::scatter) ops += c.cost + 4;
    }
    return ops;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::array<int, kMonomialCount> index_{};
  std::vector<Channel> channels_;
};

namespace detail {

template <typename ValueFn>
void add_channel(ChannelStack& stack, const std::uint8_t* mask, Monomial m, ChannelKind kind,
                 ChannelRole role, int cost, ValueFn&& fn) {
  stack.add(Channel{m, kind, role, cost,
                    integrate(stack.width(), stack.height(), mask, std::forward<ValueFn>(fn),
                              std::string(monomial_name(m)))});
}

inline void require_maps_match(const DepthImage& depth, const TanAngleMaps& maps) {
  require_same_shape(depth.depth, maps.tan_x, "depth image vs tangent maps");
  require_same_shape(depth.valid, depth.depth, "validity mask vs depth");
}

inline void add_count(ChannelStack& stack, const std::uint8_t* mask, ChannelKind kind) {
  add_channel(stack, mask, Monomial::Count, kind, ChannelRole::count, 0,
              [](std::size_t) { return 1.0; });
}

// Tangent monomials over invalid pixels, so range-space fits can subtract
// them from the hole-free constant sums.
inline void add_hole_channels(ChannelStack& stack, const DepthImage& depth, const TanAngleMaps& maps) {
  if (depth.valid_count() == depth.valid.size()) return;
  std::vector<std::uint8_t> holes(depth.valid.size());
  const auto valid = depth.valid.values();
  for (std::size_t i = 0; i < holes.size(); ++i) holes[i] = valid[i] ? 0 : 1;
  const double* tx = maps.tan_x.values().data();
  const double* ty = maps.tan_y.values().data();
  const auto* m = holes.data();
  const auto k = ChannelKind::per_frame;
  const auto r = ChannelRole::hole;
  add_channel(stack, m, Monomial::HoleTx2, k, r, 1, [=](std::size_t i) { return tx[i] * tx[i]; });
  add_channel(stack, m, Monomial::HoleTxTy, k, r, 1, [=](std::size_t i) { return tx[i] * ty[i]; });
  add_channel(stack, m, Monomial::HoleTy2, k, r, 1, [=](std::size_t i) { return ty[i] * ty[i]; });
  add_channel(stack, m, Monomial::HoleTx, k, r, 0, [=](std::size_t i) { return tx[i]; });
  add_channel(stack, m, Monomial::HoleTy, k, r, 0, [=](std::size_t i) { return ty[i]; });
}

// X = Z tan_x and Y = Z tan_y, one multiply each per valid pixel.
struct BackProjected {
  std::vector<double> X;
  std::vector<double> Y;
};

inline BackProjected back_project_all(const DepthImage& depth, const TanAngleMaps& maps) {
  const std::size_t n = depth.depth.size();
  BackProjected p{std::vector<double>(n), std::vector<double>(n)};
  const double* z = depth.depth.values().data();
  const double* tx = maps.tan_x.values().data();
  const double* ty = maps.tan_y.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    p.X[i] = z[i] * tx[i];
    p.Y[i] = z[i] * ty[i];
  }
  return p;
}

// 1/Z once per valid pixel; holes stay 0.
inline std::vector<double> inverse_depth(const DepthImage& depth) {
  const std::size_t n = depth.depth.size();
  std::vector<double> inv(n, 0.0);
  const double* z = depth.depth.values().data();
  const auto* valid = depth.valid.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    if (valid[i]) inv[i] = 1.0 / z[i];
  }
  return inv;
}

}  // namespace detail

/// Depth-independent tangent monomials over every pixel: tan_x^2,
/// tan_x tan_y, tan_y^2, tan_x, tan_y and the pixel count. Built once per
/// set of intrinsics.
inline ChannelStack build_constant_channels(const TanAngleMaps& maps) {
  ChannelStack s(maps.width(), maps.height());
  const double* tx = maps.tan_x.values().data();
  const double* ty = maps.tan_y.values().data();
  const auto k = ChannelKind::constant;
  const auto r = ChannelRole::scatter;
  detail::add_channel(s, nullptr, Monomial::Tx2, k, r, 1, [=](std::size_t i) { return tx[i] * tx[i]; });
  detail::add_channel(s, nullptr, Monomial::TxTy, k, r, 1, [=](std::size_t i) { return tx[i] * ty[i]; });
  detail::add_channel(s, nullptr, Monomial::Ty2, k, r, 1, [=](std::size_t i) { return ty[i] * ty[i]; });
  detail::add_channel(s, nullptr, Monomial::Tx, k, r, 0, [=](std::size_t i) { return tx[i]; });
  detail::add_channel(s, nullptr, Monomial::Ty, k, r, 0, [=](std::size_t i) { return ty[i]; });
  detail::add_count(s, nullptr, k);
  return s;
}

/// Per-frame tables for the (X, Y, Z, 1) scatter matrix: nine distinct
/// depth-dependent entries plus the valid count.
inline ChannelStack build_standard_implicit_channels(const DepthImage& depth, const TanAngleMaps& maps) {
  detail::require_maps_match(depth, maps);
  ChannelStack s(depth.width(), depth.height());
  const auto p = detail::back_project_all(depth, maps);
  const double* X = p.X.data();
  const double* Y = p.Y.data();
  const double* Z = depth.depth.values().data();
  const auto* m = depth.valid.values().data();
  const auto k = ChannelKind::per_frame;
  const auto r = ChannelRole::scatter;
  detail::add_channel(s, m, Monomial::X2, k, r, 1, [=](std::size_t i) { return X[i] * X[i]; });
  detail::add_channel(s, m, Monomial::XY, k, r, 1, [=](std::size_t i) { return X[i] * Y[i]; });
  detail::add_channel(s, m, Monomial::XZ, k, r, 1, [=](std::size_t i) { return X[i] * Z[i]; });
  detail::add_channel(s, m, Monomial::X, k, r, 1, [=](std::size_t i) { return X[i]; });
  detail::add_channel(s, m, Monomial::Y2, k, r, 1, [=](std::size_t i) { return Y[i] * Y[i]; });
  detail::add_channel(s, m, Monomial::YZ, k, r, 1, [=](std::size_t i) { return Y[i] * Z[i]; });
  detail::add_channel(s, m, Monomial::Y, k, r, 1, [=](std::size_t i) { return Y[i]; });
  detail::add_channel(s, m, Monomial::Z2, k, r, 1, [=](std::size_t i) { return Z[i] * Z[i]; });
  detail::add_channel(s, m, Monomial::Z, k, r, 0, [=](std::size_t i) { return Z[i]; });
  detail::add_count(s, m, k);
  return s;
}

/// Per-frame tables for the range-space implicit scatter matrix: only the
/// bottom row (tan_x/Z, tan_y/Z, 1/Z, 1/Z^2) depends on depth.
inline ChannelStack build_rgbd_implicit_channels(const DepthImage& depth, const TanAngleMaps& maps) {
  detail::require_maps_match(depth, maps);
  ChannelStack s(depth.width(), depth.height());
  const auto inv = detail::inverse_depth(depth);
  const double* w = inv.data();
  const double* tx = maps.tan_x.values().data();
  const double* ty = maps.tan_y.values().data();
  const auto* m = depth.valid.values().data();
  const auto k = ChannelKind::per_frame;
  const auto r = ChannelRole::scatter;
  detail::add_channel(s, m, Monomial::TxInvZ, k, r, 1, [=](std::size_t i) { return tx[i] * w[i]; });
  detail::add_channel(s, m, Monomial::TyInvZ, k, r, 1, [=](std::size_t i) { return ty[i] * w[i]; });
  detail::add_channel(s, m, Monomial::InvZ, k, r, 1, [=](std::size_t i) { return w[i]; });
  detail::add_channel(s, m, Monomial::InvZ2, k, r, 1, [=](std::size_t i) { return w[i] * w[i]; });
  detail::add_count(s, m, k);
  detail::add_hole_channels(s, depth, maps);
  return s;
}

/// Per-frame tables for Z = aX + bY + c: the (X, Y, 1) scatter, M^t b with
/// b = Z, and Z^2 for the residual.
inline ChannelStack build_standard_explicit_channels(const DepthImage& depth, const TanAngleMaps& maps) {
  detail::require_maps_match(depth, maps);
  ChannelStack s(depth.width(), depth.height());
  const auto p = detail::back_project_all(depth, maps);
  const double* X = p.X.data();
  const double* Y = p.Y.data();
  const double* Z = depth.depth.values().data();
  const auto* m = depth.valid.values().data();
  const auto k = ChannelKind::per_frame;
  const auto r = ChannelRole::scatter;
  detail::add_channel(s, m, Monomial::X2, k, r, 1, [=](std::size_t i) { return X[i] * X[i]; });
  detail::add_channel(s, m, Monomial::XY, k, r, 1, [=](std::size_t i) { return X[i] * Y[i]; });
  detail::add_channel(s, m, Monomial::X, k, r, 1, [=](std::size_t i) { return X[i]; });
  detail::add_channel(s, m, Monomial::Y2, k, r, 1, [=](std::size_t i) { return Y[i] * Y[i]; });
  detail::add_channel(s, m, Monomial::Y, k, r, 1, [=](std::size_t i) { return Y[i]; });
  detail::add_channel(s, m, Monomial::XZ, k, r, 1, [=](std::size_t i) { return X[i] * Z[i]; });
  detail::add_channel(s, m, Monomial::YZ, k, r, 1, [=](std::size_t i) { return Y[i] * Z[i]; });
  detail::add_channel(s, m, Monomial::Z, k, r, 0, [=](std::size_t i) { return Z[i]; });
  detail::add_channel(s, m, Monomial::Z2, k, ChannelRole::residual, 1,
                      [=](std::size_t i) { return Z[i] * Z[i]; });
  detail::add_count(s, m, k);
  return s;
}

/// Per-frame tables for 1/Z = a tan_x + b tan_y + c: only M^t b (and 1/Z^2
/// for the residual). The scatter matrix itself is entirely constant.
inline ChannelStack build_rgbd_explicit_channels(const DepthImage& depth, const TanAngleMaps& maps) {
  detail::require_maps_match(depth, maps);
  ChannelStack s(depth.width(), depth.height());
  const auto inv = detail::inverse_depth(depth);
  const double* w = inv.data();
  const double* tx = maps.tan_x.values().data();
  const double* ty = maps.tan_y.values().data();
  const auto* m = depth.valid.values().data();
  const auto k = ChannelKind::per_frame;
  const auto r = ChannelRole::scatter;
  detail::add_channel(s, m, Monomial::TxInvZ, k, r, 1, [=](std::size_t i) { return tx[i] * w[i]; });
  detail::add_channel(s, m, Monomial::TyInvZ, k, r, 1, [=](std::size_t i) { return ty[i] * w[i]; });
  detail::add_channel(s, m, Monomial::InvZ, k, r, 1, [=](std::size_t i) { return w[i]; });
  detail::add_channel(s, m, Monomial::InvZ2, k, ChannelRole::residual, 1,
                      [=](std::size_t i) { return w[i] * w[i]; });
  detail::add_count(s, m, k);
  detail::add_hole_channels(s, depth, maps);
  return s;
}

inline ChannelStack build_frame_channels(Formulation f, const DepthImage& depth, const TanAngleMaps& maps) {
  switch (f) {
    case Formulation::implicit_standard: return build_standard_implicit_channels(depth, maps);
    case Formulation::implicit_rgbd: return build_rgbd_implicit_channels(depth, maps);
    case Formulation::explicit_standard: return build_standard_explicit_channels(depth, maps);
    case Formulation::explicit_rgbd: return build_rgbd_explicit_channels(depth, maps);
  }
  throw ConfigError("unknown formulation");
}

}  // namespace rgbdfit

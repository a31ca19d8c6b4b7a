#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rgbdfit/error.hpp"
#include "rgbdfit/fitting.hpp"
#include "rgbdfit/formulation.hpp"
#include "rgbdfit/integral.hpp"
#include "rgbdfit/lattice.hpp"
#include "rgbdfit/linalg.hpp"

namespace rgbdfit {

template <std::size_t D>
struct KMeansResult {
  std::vector<int> labels;
  std::vector<Vec<D>> centroids;
  int k = 0;             // clusters actually used
  bool clamped = false;  // requested k exceeded the number of points
  int iterations = 0;
  // Within-cluster sum of squares after each assignment step.
  std::vector<double> objective;
};

namespace detail {

template <std::size_t D>
double sq_dist(const Vec<D>& a, const Vec<D>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < D; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding. Deterministic for a fixed seed;
/// stops when no label changes or after max_iterations.
template <std::size_t D>
KMeansResult<D> kmeans(std::span<const Vec<D>> points, int k, std::uint64_t seed, int max_iterations = 100) {
  if (points.empty()) throw ConfigError("k-means needs at least one point");
  if (k < 1) throw ConfigError("k-means needs k >= 1");
  KMeansResult<D> out;
  const int n = static_cast<int>(points.size());
  out.clamped = k > n;
  out.k = std::min(k, n);

  std::mt19937_64 rng(seed);
  std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
  std::vector<char> chosen(points.size(), 0);
  auto pick = [&](int i) {
    chosen[static_cast<std::size_t>(i)] = 1;
    out.centroids.push_back(points[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < points.size(); ++j) d2[j] = std::min(d2[j], detail::sq_dist(points[j], points[static_cast<std::size_t>(i)]));
  };
  pick(std::uniform_int_distribution<int>(0, n - 1)(rng));
  while (static_cast<int>(out.centroids.size()) < out.k) {
    double total = 0.0;
    for (double v : d2) total += v;
    int next = -1;
    if (total > 0.0) {
      double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (int j = 0; j < n; ++j) {
        target -= d2[static_cast<std::size_t>(j)];
        if (target < 0.0 && d2[static_cast<std::size_t>(j)] > 0.0) {
          next = j;
          break;
        }
      }
      if (next < 0) {
        for (int j = n - 1; j >= 0; --j) {
          if (d2[static_cast<std::size_t>(j)] > 0.0) {
            next = j;
            break;
          }
        }
      }
    } else {
      // Every remaining point duplicates a centroid; take the first unused.
      for (int j = 0; j < n && next < 0; ++j) {
        if (!chosen[static_cast<std::size_t>(j)]) next = j;
      }
    }
    pick(next);
  }

  out.labels.assign(points.size(), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double wcss = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      int best = 0;
      double best_d = detail::sq_dist(points[j], out.centroids[0]);
      for (int c = 1; c < out.k; ++c) {
        const double d = detail::sq_dist(points[j], out.centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      changed |= out.labels[j] != best;
      out.labels[j] = best;
      wcss += best_d;
    }
    out.objective.push_back(wcss);
    out.iterations = iter + 1;
    if (!changed) break;

    std::vector<Vec<D>> sums(static_cast<std::size_t>(out.k), Vec<D>{});
    std::vector<int> counts(static_cast<std::size_t>(out.k), 0);
    for (std::size_t j = 0; j < points.size(); ++j) {
      const auto c = static_cast<std::size_t>(out.labels[j]);
      for (std::size_t i = 0; i < D; ++i) sums[c][i] += points[j][i];
      ++counts[c];
    }
    for (std::size_t c = 0; c < sums.size(); ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t i = 0; i < D; ++i) out.centroids[c][i] = sums[c][i] / counts[c];
    }
  }
  return out;
}

using Feature = Vec4;

/// Clustering feature of a fitted plane: unit normal oriented so the offset
/// is non-negative, and the offset divided by depth_scale so normal and
/// offset differences weigh comparably.
inline Feature tile_features(const FitResult& fit, double depth_scale = 5.0) {
  Vec3 n = fit.plane.unit_normal();
  double d = fit.plane.unit_offset();
  if (d < 0.0) {
    for (double& v : n) v = -v;
    d = -d;
  }
  return {n[0], n[1], n[2], d / depth_scale};
}

enum class TileStatus { fitted, too_invalid, high_error_leaf };

inline std::string_view to_string(TileStatus s) {
  switch (s) {
    case TileStatus::fitted: return "fitted";
    case TileStatus::too_invalid: return "too_invalid";
    case TileStatus::high_error_leaf: return "high_error_leaf";
  }
  return "?";
}

enum class ErrorMetric { rms, max_abs };

struct SegConfig {
  int initial_tile = 64;
  int max_depth = 3;
  // Non-positive selects default_threshold(formulation).
  double rms_threshold = 0.0;
  double min_valid_fraction = 0.5;
  int k = 8;
  Formulation formulation = Formulation::implicit_rgbd;
  Backend backend = Backend::integral;
  ErrorMetric metric = ErrorMetric::rms;
  double depth_scale = 5.0;
  std::uint64_t seed = 0;
  int kmeans_iterations = 100;

  static double default_threshold(Formulation f) {
    return !is_rgbd(f) ? 0.02 : 8e-3;
  }
  double threshold() const { return rms_threshold > 0.0 ? rms_threshold : default_threshold(formulation); }

  void validate() const {
    if (max_depth < 0) throw ConfigError("max_depth must be non-negative");
    // The smallest tile must still hold a 2x2 window.
    if (max_depth > 20 || initial_tile < (2 << max_depth)) {
      throw ConfigError("initial_tile must be at least 2^max_depth * 2 pixels");
    }
    if (!(threshold() > 0.0)) throw ConfigError("error threshold must be positive");
    if (!(min_valid_fraction >= 0.0 && min_valid_fraction <= 1.0)) {
      throw ConfigError("min_valid_fraction must be in [0, 1]");
    }
    if (k < 1) throw ConfigError("k must be at least 1");
    if (!(depth_scale > 0.0)) throw ConfigError("depth_scale must be positive");
    if (kmeans_iterations < 1) throw ConfigError("kmeans_iterations must be at least 1");
  }
};

struct Tile {
  Rect rect;
  TileStatus status = TileStatus::too_invalid;
  std::optional<FitResult> fit;
  int level = 0;
  int cluster = -1;
};

inline constexpr int kUnlabeled = -1;

struct Segmentation {
  std::vector<Tile> tiles;  // leaves only
  Lattice<int> labels;      // cluster per pixel, kUnlabeled outside fitted tiles
  std::vector<Feature> centroids;
  int k = 0;
  bool k_clamped = false;
  int fitted = 0;
  int too_invalid = 0;
  int high_error = 0;
};

namespace detail {

// Largest absolute residual over the tile, in the formulation's own metric.
inline double max_abs_residual(const FitResult& fit, const DepthImage& depth, const TanAngleMaps& maps,
                               const Rect& r) {
  double worst = 0.0;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      if (!depth.is_valid(x, y)) continue;
      const double z = depth.depth(x, y);
      const double tx = maps.tan_x(x, y);
      const double ty = maps.tan_y(x, y);
      double e = 0.0;
      switch (fit.formulation) {
        case Formulation::implicit_standard: e = fit.plane.residual({z * tx, z * ty, z}); break;
        case Formulation::implicit_rgbd: {
          const auto& p = fit.plane;
          e = p.a() * tx + p.b() * ty + p.c() + p.d() / z;
          break;
        }
        case Formulation::explicit_standard: {
          const auto& a = fit.explicit_plane->alpha;
          e = a[0] * z * tx + a[1] * z * ty + a[2] - z;
          break;
        }
        case Formulation::explicit_rgbd: {
          const auto& a = fit.explicit_plane->alpha;
          e = a[0] * tx + a[1] * ty + a[2] - 1.0 / z;
          break;
        }
      }
      worst = std::max(worst, std::abs(e));
    }
  }
  return worst;
}

}  // namespace detail

/// Quadtree planar segmentation.
///
/// The image is cut into a grid of initial_tile squares (truncated at the
/// right and bottom borders). Each tile is rejected when its valid fraction
/// is below min_valid_fraction, accepted when its fit error is within the
/// threshold, and otherwise split into four children of half the width and
/// height, down to max_depth. The fitted tiles are then clustered by plane
/// coefficients.
inline Segmentation segment(const DepthImage& depth, const TanAngleMaps& maps, const SegConfig& cfg,
                            const ChannelStack* frame = nullptr, const ChannelStack* constant = nullptr,
                            FactorCache* cache = nullptr) {
  cfg.validate();
  const int w = depth.width();
  const int h = depth.height();
  if (w < cfg.initial_tile || h < cfg.initial_tile) {
    throw ConfigError("image " + std::to_string(w) + "x" + std::to_string(h) + " is smaller than one " +
                      std::to_string(cfg.initial_tile) + "-pixel tile");
  }
  const PlaneFitter fitter(cfg.formulation, cfg.backend, depth, maps, frame, constant, cache);
  const double threshold = cfg.threshold();

  Segmentation seg;
  std::vector<Tile> level_tiles;
  for (int y = 0; y < h; y += cfg.initial_tile) {
    for (int x = 0; x < w; x += cfg.initial_tile) {
      level_tiles.push_back({Rect{x, y, std::min(x + cfg.initial_tile, w), std::min(y + cfg.initial_tile, h)},
                             TileStatus::too_invalid, std::nullopt, 0, -1});
    }
  }

  for (int level = 0; !level_tiles.empty(); ++level) {
    std::vector<Tile> next;
    for (auto& tile : level_tiles) {
      const Rect& r = tile.rect;
      const long n = fitter.valid_count(r);
      if (n < min_samples(cfg.formulation) ||
          static_cast<double>(n) < cfg.min_valid_fraction * static_cast<double>(r.area())) {
        tile.status = TileStatus::too_invalid;
        seg.tiles.push_back(std::move(tile));
        continue;
      }
      FitResult fit = fitter.fit(r);
      const double err = cfg.metric == ErrorMetric::rms ? fit.rms : detail::max_abs_residual(fit, depth, maps, r);
      if (!fit.degenerate && err <= threshold) {
        tile.status = TileStatus::fitted;
        tile.fit = std::move(fit);
        seg.tiles.push_back(std::move(tile));
        continue;
      }
      if (level >= cfg.max_depth || r.width() < 2 || r.height() < 2) {
        tile.status = TileStatus::high_error_leaf;
        tile.fit = std::move(fit);
        seg.tiles.push_back(std::move(tile));
        continue;
      }
      const int xm = r.x0 + r.width() / 2;
      const int ym = r.y0 + r.height() / 2;
      for (const Rect& child : {Rect{r.x0, r.y0, xm, ym}, Rect{xm, r.y0, r.x1, ym}, Rect{r.x0, ym, xm, r.y1},
                                Rect{xm, ym, r.x1, r.y1}}) {
        next.push_back({child, TileStatus::too_invalid, std::nullopt, level + 1, -1});
      }
    }
    level_tiles = std::move(next);
  }

  std::vector<Feature> features;
  std::vector<std::size_t> fitted_index;
  for (std::size_t i = 0; i < seg.tiles.size(); ++i) {
    switch (seg.tiles[i].status) {
      case TileStatus::fitted:
        ++seg.fitted;
        features.push_back(tile_features(*seg.tiles[i].fit, cfg.depth_scale));
        fitted_index.push_back(i);
        break;
      case TileStatus::too_invalid: ++seg.too_invalid; break;
      case TileStatus::high_error_leaf: ++seg.high_error; break;
    }
  }

  seg.labels = Lattice<int>(w, h, kUnlabeled);
  if (features.empty()) return seg;
  const auto km = kmeans<4>(features, cfg.k, cfg.seed, cfg.kmeans_iterations);
  seg.k = km.k;
  seg.k_clamped = km.clamped;
  seg.centroids = km.centroids;
  for (std::size_t j = 0; j < fitted_index.size(); ++j) {
    Tile& tile = seg.tiles[fitted_index[j]];
    tile.cluster = km.labels[j];
    for (int y = tile.rect.y0; y < tile.rect.y1; ++y) {
      for (int x = tile.rect.x0; x < tile.rect.x1; ++x) seg.labels(x, y) = tile.cluster;
    }
  }
  return seg;
}

// Fixed palette so cluster colors are reproducible between runs.
inline std::array<std::uint8_t, 3> cluster_color(int cluster) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 12> palette = {{
      {230, 25, 75}, {60, 180, 75}, {255, 225, 25}, {0, 130, 200}, {245, 130, 48}, {145, 30, 180},
      {70, 240, 240}, {240, 50, 230}, {210, 245, 60}, {250, 190, 212}, {0, 128, 128}, {170, 110, 40}}};
  return palette[static_cast<std::size_t>(cluster) % palette.size()];
}

inline constexpr std::array<std::uint8_t, 3> kTooInvalidColor = {96, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kHighErrorColor = {0, 0, 96};

/// RGB rendering: fitted tiles in their cluster color, rejected tiles dark
/// red (too many invalid points) or dark blue (fit error too high).
inline Lattice<std::array<std::uint8_t, 3>> render_segmentation(const Segmentation& seg) {
  Lattice<std::array<std::uint8_t, 3>> img(seg.labels.width(), seg.labels.height(), {0, 0, 0});
  for (const auto& tile : seg.tiles) {
    const auto color = tile.status == TileStatus::fitted       ? cluster_color(tile.cluster)
                       : tile.status == TileStatus::too_invalid ? kTooInvalidColor
                                                                : kHighErrorColor;
    for (int y = tile.rect.y0; y < tile.rect.y1; ++y) {
      for (int x = tile.rect.x0; x < tile.rect.x1; ++x) img(x, y) = color;
    }
  }
  return img;
}

inline constexpr const char* kTileCsvHeader = "x0,y0,x1,y1,level,status,a,b,c,d,rms,n_points,cluster";

inline void write_tiles_csv(std::ostream& os, const Segmentation& seg) {
  const auto old = os.precision(17);
  os << kTileCsvHeader << '\n';
  for (const auto& t : seg.tiles) {
    os << t.rect.x0 << ',' << t.rect.y0 << ',' << t.rect.x1 << ',' << t.rect.y1 << ',' << t.level << ','
       << to_string(t.status) << ',';
    if (t.fit) {
      const auto& p = t.fit->plane;
      os << p.a() << ',' << p.b() << ',' << p.c() << ',' << p.d() << ',' << t.fit->rms << ','
         << t.fit->n_points;
    } else {
      os << ",,,,,";
    }
    os << ',' << t.cluster << '\n';
  }
  os.precision(old);
}

}  // namespace rgbdfit

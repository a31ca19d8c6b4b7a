#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rgbdfit/camera.hpp"
#include "rgbdfit/error.hpp"
#include "rgbdfit/fitting.hpp"
#include "rgbdfit/formulation.hpp"
#include "rgbdfit/integral.hpp"
#include "rgbdfit/synth.hpp"

namespace rgbdfit::bench {

/// Static integral-image cost of one formulation. A table of a monomial
/// with per-pixel cost C costs N (C + 4) operations over N pixels.
struct OpCount {
  Formulation formulation;
  int per_frame_channels = 0;  // distinct depth-dependent scatter entries
  int constant_channels = 0;   // reusable tangent tables
  int ops_per_pixel = 0;       // per-frame build cost, in units of N
};

// Predicted counts: 9 tables / 44N, 4 / 20N, 8 / 39N, 3 / 15N.
inline OpCount predicted_op_count(Formulation f) {
  switch (f) {
    case Formulation::implicit_standard: return {f, 9, 0, 8 * (1 + 4) + 4};
    case Formulation::implicit_rgbd: return {f, 4, 5, 4 * (1 + 4)};
    case Formulation::explicit_standard: return {f, 8, 0, 7 * (4 + 1) + 4};
    case Formulation::explicit_rgbd: return {f, 3, 5, 3 * (1 + 4)};
  }
  throw ConfigError("unknown formulation");
}

/// Counts what the channel builders actually register for a formulation on a
/// small hole-free frame.
inline OpCount op_count_audit(Formulation f) {
  const auto cam = CameraIntrinsics(4.0, 4.0, 1.5, 1.5, 4, 4);
  const auto maps = compute_tan_maps(cam);
  DepthImage depth(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) depth.set(x, y, 1.0);
  }
  const ChannelStack frame = build_frame_channels(f, depth, maps);
  OpCount c{f};
  c.per_frame_channels = frame.count(ChannelKind::per_frame, ChannelRole::scatter);
  c.ops_per_pixel = frame.build_ops_per_pixel(ChannelKind::per_frame);
  if (is_rgbd(f)) {
    c.constant_channels = build_constant_channels(maps).count(ChannelKind::constant, ChannelRole::scatter);
  }
  return c;
}

struct Method {
  Formulation formulation;
  Backend backend;
};

inline std::vector<Method> all_methods() {
  std::vector<Method> m;
  for (auto b : {Backend::naive, Backend::integral}) {
    for (auto f : kAllFormulations) m.push_back({f, b});
  }
  return m;
}

struct BenchConfig {
  int width = 640;
  int height = 480;
  int tile = 50;  // 50 x 50 = 2500 points per fit
  std::vector<int> plane_counts = {0, 1, 10, 50, 100, 200, 500};
  int repetitions = 5;
  int warmup = 2;
  // Fits timed per repetition for the per-fit figure.
  int per_fit_samples = 2000;
  std::vector<Method> methods = all_methods();
  std::uint64_t seed = 1;

  void validate() const {
    if (width < 1 || height < 1) throw ConfigError("image size must be positive");
    if (tile < 2 || tile > width || tile > height) throw ConfigError("tile must fit inside the image");
    if (repetitions < 3) throw ConfigError("repetitions must be at least 3");
    if (warmup < 1) throw ConfigError("warmup must be at least 1");
    if (per_fit_samples < 1) throw ConfigError("per_fit_samples must be positive");
    for (int p : plane_counts) {
      if (p < 0) throw ConfigError("plane counts must be non-negative");
    }
    if (methods.empty()) throw ConfigError("no methods selected");
  }
};

struct Stats {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

inline Stats summarize(std::vector<double> v) {
  if (v.empty()) return {};
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double med = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {v.front(), med, v.back()};
}

struct Sample {
  Method method;
  std::string phase;  // build | fit | total
  int plane_count = 0;
  int rep = 0;
  double seconds = 0.0;
};

struct MethodReport {
  Method method;
  std::vector<double> build;    // per repetition
  std::vector<double> per_fit;  // per repetition
  Stats build_stats;
  Stats per_fit_stats;
  std::vector<std::pair<int, Stats>> total;  // per plane count
  // Sum of fitted coefficients over the deterministic workload.
  double checksum = 0.0;
};

struct BenchReport {
  std::vector<Sample> samples;
  std::vector<MethodReport> methods;

  const MethodReport* find(Formulation f, Backend b) const {
    for (const auto& m : methods) {
      if (m.method.formulation == f && m.method.backend == b) return &m;
    }
    return nullptr;
  }

  // Median-based ratio of range-space to standard build time.
  double build_ratio(bool implicit) const {
    const auto* std_m = find(implicit ? Formulation::implicit_standard : Formulation::explicit_standard, Backend::integral);
    const auto* new_m = find(implicit ? Formulation::implicit_rgbd : Formulation::explicit_rgbd, Backend::integral);
    if (!std_m || !new_m) throw ConfigError("build ratio needs both integral methods");
    return new_m->build_stats.median / std_m->build_stats.median;
  }
  double per_fit_ratio(bool implicit, Backend b = Backend::integral) const {
    const auto* std_m = find(implicit ? Formulation::implicit_standard : Formulation::explicit_standard, b);
    const auto* new_m = find(implicit ? Formulation::implicit_rgbd : Formulation::explicit_rgbd, b);
    if (!std_m || !new_m) throw ConfigError("per-fit ratio needs both methods");
    return new_m->per_fit_stats.median / std_m->per_fit_stats.median;
  }
};

/// The benchmark frame: one tilted plane filling the view, with quadratic
/// depth noise.
inline RenderedFrame bench_frame(const TanAngleMaps& maps, std::uint64_t seed) {
  SyntheticScene scene{{GroundTruthPlane(0.2, -0.3, 1.0, -2.5)}};
  return render_scene(scene, maps, {NoiseModel::quadratic(), 0.0, seed});
}

// Fitting windows tile the image in reading order and are reused cyclically.
inline std::vector<Rect> bench_rects(int width, int height, int tile) {
  std::vector<Rect> out;
  for (int y = 0; y + tile <= height; y += tile) {
    for (int x = 0; x + tile <= width; x += tile) out.push_back({x, y, x + tile, y + tile});
  }
  return out;
}

namespace detail {

using Clock = std::chrono::steady_clock;

template <typename Fn>
double time_seconds(Fn&& fn) {
  const auto t0 = Clock::now();
  fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

class MethodRunner {
 public:
  MethodRunner(Method m, const DepthImage& depth, const TanAngleMaps& maps, const ChannelStack& constant,
               const std::vector<Rect>& rects)
      : method_(m), depth_(depth), maps_(maps), constant_(constant), rects_(rects) {
    if (m.backend == Backend::integral && m.formulation == Formulation::explicit_rgbd) {
      for (const auto& r : rects_) factors_.push_back(prepare_explicit_rgbd(constant_, r));
    }
  }

  void build() {
    if (method_.backend == Backend::integral) frame_ = build_frame_channels(method_.formulation, depth_, maps_);
  }

  // Fits `count` windows; returns the sum of coefficients so the work
  // cannot be discarded.
  double fit(int count) const {
    double acc = 0.0;
    const PlaneFitter fitter(method_.formulation, method_.backend, depth_, maps_,
                             method_.backend == Backend::integral ? &frame_ : nullptr, &constant_);
    for (int i = 0; i < count; ++i) {
      const std::size_t j = static_cast<std::size_t>(i) % rects_.size();
      const FitResult r = factors_.empty() ? fitter.fit(rects_[j]) : fit_explicit_rgbd_prepared(frame_, constant_, factors_[j]);
      for (double c : r.plane.coeffs()) acc += c;
    }
    return acc;
  }

 private:
  Method method_;
  const DepthImage& depth_;
  const TanAngleMaps& maps_;
  const ChannelStack& constant_;
  const std::vector<Rect>& rects_;
  std::vector<RectFactor> factors_;
  ChannelStack frame_;
};

}  // namespace detail

/// Times each method on one synthetic frame: per-frame channel build (zero
/// for naive backends), per-fit cost, and build plus P fits for every plane
/// count P. Timed sections run on the calling thread only. The workload is
/// fixed by the seed; only the timings vary between runs.
inline BenchReport run_bench(const BenchConfig& cfg) {
  cfg.validate();
  const auto cam = default_intrinsics(cfg.width, cfg.height);
  const auto maps = compute_tan_maps(cam);
  const auto frame = bench_frame(maps, cfg.seed);
  const auto constant = build_constant_channels(maps);
  const auto rects = bench_rects(cfg.width, cfg.height, cfg.tile);

  BenchReport report;
  volatile double sink = 0.0;
  std::vector<detail::MethodRunner> runners;
  runners.reserve(cfg.methods.size());
  for (const auto& m : cfg.methods) runners.emplace_back(m, frame.depth, maps, constant, rects);
  for (auto& runner : runners) {
    for (int i = 0; i < cfg.warmup; ++i) {
      runner.build();
      sink = sink + runner.fit(std::min(cfg.per_fit_samples, 200));
    }
  }

  // Repetitions are interleaved across methods so slow periods on the host
  // affect every method alike.
  std::vector<MethodReport> reports(cfg.methods.size());
  std::vector<std::vector<std::vector<double>>> totals(
      cfg.methods.size(), std::vector<std::vector<double>>(cfg.plane_counts.size()));
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    for (std::size_t k = 0; k < runners.size(); ++k) {
      const Method& m = cfg.methods[k];
      auto& runner = runners[k];
      MethodReport& mr = reports[k];
      mr.method = m;
      const double build = m.backend == Backend::integral ? detail::time_seconds([&] { runner.build(); }) : 0.0;
      mr.build.push_back(build);
      report.samples.push_back({m, "build", 0, rep, build});

      double acc = 0.0;
      const double fit_time = detail::time_seconds([&] { acc = runner.fit(cfg.per_fit_samples); });
      sink = sink + acc;
      mr.per_fit.push_back(fit_time / cfg.per_fit_samples);
      if (rep == 0) mr.checksum = acc;

      for (std::size_t p = 0; p < cfg.plane_counts.size(); ++p) {
        const int count = cfg.plane_counts[p];
        const double t = count == 0 ? 0.0 : detail::time_seconds([&] { sink = sink + runner.fit(count); });
        report.samples.push_back({m, "fit", count, rep, t});
        report.samples.push_back({m, "total", count, rep, build + t});
        totals[k][p].push_back(build + t);
      }
    }
  }
  for (std::size_t k = 0; k < reports.size(); ++k) {
    MethodReport& mr = reports[k];
    mr.build_stats = summarize(mr.build);
    mr.per_fit_stats = summarize(mr.per_fit);
    for (std::size_t p = 0; p < cfg.plane_counts.size(); ++p) {
      mr.total.emplace_back(cfg.plane_counts[p], summarize(totals[k][p]));
    }
    report.methods.push_back(std::move(mr));
  }
  return report;
}

inline void write_csv(std::ostream& os, const BenchReport& report) {
  const auto old = os.precision(9);
  os << "method,backend,phase,plane_count,rep,seconds\n";
  for (const auto& s : report.samples) {
    os << to_string(s.method.formulation) << ',' << to_string(s.method.backend) << ',' << s.phase << ','
       << s.plane_count << ',' << s.rep << ',' << s.seconds << '\n';
  }
  os.precision(old);
}

// Whitespace-separated medians, one block per method, for gnuplot.
inline void write_summary(std::ostream& os, const BenchReport& report) {
  const auto old = os.precision(6);
  for (const auto& m : report.methods) {
    os << "# " << to_string(m.method.formulation) << ' ' << to_string(m.method.backend)
       << " build_median=" << m.build_stats.median << " per_fit_median=" << m.per_fit_stats.median << '\n';
    os << "# plane_count total_min total_median total_max\n";
    for (const auto& [count, st] : m.total) os << count << ' ' << st.min << ' ' << st.median << ' ' << st.max << '\n';
    os << "\n\n";
  }
  const bool have_integral = report.find(Formulation::implicit_standard, Backend::integral) &&
                             report.find(Formulation::implicit_rgbd, Backend::integral);
  if (have_integral) os << "# implicit build ratio (rgbd/standard) " << report.build_ratio(true) << '\n';
  if (report.find(Formulation::explicit_standard, Backend::integral) &&
      report.find(Formulation::explicit_rgbd, Backend::integral)) {
    os << "# explicit build ratio (rgbd/standard) " << report.build_ratio(false) << '\n';
    os << "# explicit per-fit ratio (rgbd/standard) " << report.per_fit_ratio(false) << '\n';
  }
  if (report.find(Formulation::implicit_standard, Backend::naive) &&
      report.find(Formulation::implicit_rgbd, Backend::naive)) {
    // Direction only: hardware dependent.
    const double r = report.per_fit_ratio(true, Backend::naive);
    os << "# naive implicit per-fit ratio (rgbd/standard) " << r << (r > 1.0 ? " (rgbd slower)" : " (rgbd faster)")
       << '\n';
  }
  os.precision(old);
}

}  // namespace rgbdfit::bench

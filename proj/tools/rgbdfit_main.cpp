#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rgbdfit/rgbdfit.hpp"

using namespace rgbdfit;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct Shared {
  std::string intrinsics;
  std::uint64_t seed = 1;
  std::string out;
};

struct SynthArgs {
  std::string scene;
  std::string noise = "on";
  double sigma = 5e-3;
  double dropout = 0.0;
  std::string format = "pgm";
  std::string labels;
  int width = 640;
  int height = 480;
};

struct FitArgs {
  std::string depth;
  std::string formulation = "implicit-rgbd";
  std::string backend = "integral";
  std::vector<std::string> rects;
};

struct SegmentArgs {
  std::string depth;
  std::string formulation = "implicit-rgbd";
  std::string backend = "integral";
  std::string csv;
  std::string metric = "rms";
  SegConfig cfg;
};

struct BenchArgs {
  bench::BenchConfig cfg;
  std::vector<std::string> methods;
  std::string summary;
};

// Usage errors are raised as ConfigError and mapped to exit code 1.
Rect parse_rect(const std::string& text) {
  std::vector<int> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("--rect expects x0,y0,x1,y1 integers, got '" + text + "'");
    }
  }
  if (v.size() != 4) throw ConfigError("--rect expects x0,y0,x1,y1 integers, got '" + text + "'");
  return {v[0], v[1], v[2], v[3]};
}

Formulation formulation_arg(const std::string& s) {
  try {
    return parse_formulation(s);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

Backend backend_arg(const std::string& s) {
  try {
    return parse_backend(s);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

CameraIntrinsics camera_for(const Shared& shared, int width, int height) {
  if (shared.intrinsics.empty()) return default_intrinsics(width, height);
  return io::load_intrinsics(shared.intrinsics);
}

TanAngleMaps maps_for_depth(const Shared& shared, const DepthImage& depth) {
  const auto cam = camera_for(shared, depth.width(), depth.height());
  if (cam.width() != depth.width() || cam.height() != depth.height()) {
    std::ostringstream os;
    os << "intrinsics are " << cam.width() << "x" << cam.height() << " but the depth image is " << depth.width()
       << "x" << depth.height();
    throw DimensionMismatch(os.str());
  }
  return compute_tan_maps(cam);
}

// Writes to --out when given, otherwise to standard output.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  fn(out);
  if (!out) throw ParseError("failed writing '" + path + "'");
}

int run_synth(const Shared& shared, const SynthArgs& a) {
  if (shared.out.empty()) throw ConfigError("synth needs --out <depth file>");
  const auto cam = camera_for(shared, a.width, a.height);
  const auto maps = compute_tan_maps(cam);
  RenderOptions opts;
  opts.seed = shared.seed;
  opts.dropout = a.dropout;
  if (a.noise == "on") {
    opts.noise = NoiseModel::quadratic();
  } else if (a.noise == "fixed") {
    opts.noise = NoiseModel::fixed(a.sigma);
  }
  const auto frame = render_scene(io::load_scene(a.scene), maps, opts);
  if (a.format == "raw") {
    io::write_depth_raw(shared.out, frame.depth);
  } else {
    io::write_depth_pgm(shared.out, frame.depth);
  }
  if (!a.labels.empty()) io::write_pgm8(a.labels, io::encode_labels(frame.labels));
  return 0;
}

int run_fit(const Shared& shared, const FitArgs& a) {
  const auto f = formulation_arg(a.formulation);
  const auto b = backend_arg(a.backend);
  std::vector<Rect> rects;
  for (const auto& r : a.rects) rects.push_back(parse_rect(r));
  const auto depth = io::read_depth(a.depth);
  const auto maps = maps_for_depth(shared, depth);
  if (rects.empty()) rects.push_back({0, 0, depth.width(), depth.height()});

  std::optional<ChannelStack> frame, constant;
  if (b == Backend::integral) frame = build_frame_channels(f, depth, maps);
  if (is_rgbd(f)) constant = build_constant_channels(maps);
  const PlaneFitter fitter(f, b, depth, maps, frame ? &*frame : nullptr, constant ? &*constant : nullptr);

  std::vector<FitResult> fits;
  for (const auto& r : rects) fits.push_back(fitter.fit(r));
  emit(shared.out, [&](std::ostream& os) {
    os << kFitCsvHeader << '\n';
    for (std::size_t i = 0; i < rects.size(); ++i) write_fit_csv(os, fits[i], b, rects[i]);
  });
  return 0;
}

int run_segment(const Shared& shared, SegmentArgs a) {
  if (shared.out.empty()) throw ConfigError("segment needs --out <label image .ppm>");
  a.cfg.formulation = formulation_arg(a.formulation);
  a.cfg.backend = backend_arg(a.backend);
  a.cfg.metric = a.metric == "max" ? ErrorMetric::max_abs : ErrorMetric::rms;
  a.cfg.seed = shared.seed;
  a.cfg.validate();

  const auto depth = io::read_depth(a.depth);
  const auto maps = maps_for_depth(shared, depth);
  std::optional<ChannelStack> frame, constant;
  std::unique_ptr<FactorCache> cache;
  if (a.cfg.backend == Backend::integral) {
    frame = build_frame_channels(a.cfg.formulation, depth, maps);
    if (is_rgbd(a.cfg.formulation)) constant = build_constant_channels(maps);
    if (a.cfg.formulation == Formulation::explicit_rgbd) cache = std::make_unique<FactorCache>(*constant);
  }
  const auto seg = segment(depth, maps, a.cfg, frame ? &*frame : nullptr, constant ? &*constant : nullptr, cache.get());
  io::write_ppm(shared.out, render_segmentation(seg));
  emit(a.csv, [&](std::ostream& os) { write_tiles_csv(os, seg); });
  std::cerr << "segment: " << seg.tiles.size() << " tiles, " << seg.fitted << " fitted, k=" << seg.k << '\n';
  return 0;
}

std::vector<bench::Method> parse_methods(const std::vector<std::string>& names) {
  if (names.empty()) return bench::all_methods();
  std::vector<bench::Method> out;
  for (const auto& n : names) {
    const auto colon = n.find(':');
    if (colon == std::string::npos) {
      // A bare formulation selects both backends.
      const auto f = formulation_arg(n);
      out.push_back({f, Backend::naive});
      out.push_back({f, Backend::integral});
    } else {
      out.push_back({formulation_arg(n.substr(0, colon)), backend_arg(n.substr(colon + 1))});
    }
  }
  return out;
}

int run_bench_cmd(const Shared& shared, BenchArgs a) {
  a.cfg.methods = parse_methods(a.methods);
  a.cfg.seed = shared.seed;
  const auto report = bench::run_bench(a.cfg);
  emit(shared.out, [&](std::ostream& os) { bench::write_csv(os, report); });
  if (!a.summary.empty()) emit(a.summary, [&](std::ostream& os) { bench::write_summary(os, report); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plane fitting on depth images with integral images and range-space coefficients"};
  app.require_subcommand(1);
  app.fallthrough();
  Shared shared;
  app.add_option("--intrinsics", shared.intrinsics, "Camera intrinsics file (key=value lines)")->check(CLI::ExistingFile);
  app.add_option("--seed", shared.seed, "Random seed")->capture_default_str();
  app.add_option("--out", shared.out, "Output path (standard output when omitted, where allowed)");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render a synthetic scene to a depth image");
  s->add_option("--scene", synth.scene, "Scene file: one plane 'a b c d [x0 y0 x1 y1]' per line")->required();
  s->add_option("--noise", synth.noise, "Depth noise: on (quadratic), off, fixed")
      ->check(CLI::IsMember({"on", "off", "fixed"}))
      ->capture_default_str();
  s->add_option("--sigma", synth.sigma, "Standard deviation in meters for --noise fixed")->capture_default_str();
  s->add_option("--dropout", synth.dropout, "Fraction of pixels invalidated at random")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  s->add_option("--format", synth.format, "Depth format: pgm (16-bit millimeters) or raw (float64)")
      ->check(CLI::IsMember({"pgm", "raw"}))
      ->capture_default_str();
  s->add_option("--labels", synth.labels, "Also write the ground-truth label image (8-bit PGM, 0 = no plane)");
  s->add_option("--width", synth.width, "Image width without --intrinsics")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--height", synth.height, "Image height without --intrinsics")->check(CLI::PositiveNumber)->capture_default_str();

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit planes to rectangles of a depth image; CSV rows");
  f->add_option("--depth", fit.depth, "Depth image (.pgm or .f64)")->required();
  f->add_option("--formulation", fit.formulation,
                "implicit-standard, implicit-rgbd, explicit-standard or explicit-rgbd")
      ->capture_default_str();
  f->add_option("--backend", fit.backend, "naive or integral")->capture_default_str();
  f->add_option("--rect", fit.rects, "Window x0,y0,x1,y1 (half-open, repeatable; whole image by default)");

  SegmentArgs seg;
  auto* g = app.add_subcommand("segment", "Quadtree plane segmentation; color PPM to --out, tile CSV");
  g->add_option("--depth", seg.depth, "Depth image (.pgm or .f64)")->required();
  g->add_option("--formulation", seg.formulation, "Fitting formulation")->capture_default_str();
  g->add_option("--backend", seg.backend, "naive or integral")->capture_default_str();
  g->add_option("--csv", seg.csv, "Tile CSV path (standard output when omitted)");
  g->add_option("--tile", seg.cfg.initial_tile, "Initial tile size in pixels")->capture_default_str();
  g->add_option("--max-depth", seg.cfg.max_depth, "Maximum subdivision depth")->capture_default_str();
  g->add_option("--threshold", seg.cfg.rms_threshold,
                "Fit error threshold in the formulation's metric (default depends on formulation)");
  g->add_option("--min-valid", seg.cfg.min_valid_fraction, "Minimum fraction of valid pixels per tile")
      ->capture_default_str();
  g->add_option("--k", seg.cfg.k, "Number of clusters")->capture_default_str();
  g->add_option("--metric", seg.metric, "Tile error: rms or max")
      ->check(CLI::IsMember({"rms", "max"}))
      ->capture_default_str();
  g->add_option("--depth-scale", seg.cfg.depth_scale, "Offset scale in meters for clustering features")
      ->capture_default_str();
  g->add_option("--kmeans-iterations", seg.cfg.kmeans_iterations, "Lloyd iteration cap")->capture_default_str();

  BenchArgs bench_args;
  auto* b = app.add_subcommand("bench", "Time channel builds and fits; CSV of samples");
  b->add_option("--width", bench_args.cfg.width, "Frame width")->capture_default_str();
  b->add_option("--height", bench_args.cfg.height, "Frame height")->capture_default_str();
  b->add_option("--tile", bench_args.cfg.tile, "Fit window size")->capture_default_str();
  b->add_option("--planes", bench_args.cfg.plane_counts, "Plane counts to sweep")->delimiter(',');
  b->add_option("--reps", bench_args.cfg.repetitions, "Timed repetitions")->capture_default_str();
  b->add_option("--warmup", bench_args.cfg.warmup, "Untimed warm-up rounds")->capture_default_str();
  b->add_option("--per-fit", bench_args.cfg.per_fit_samples, "Fits per per-fit measurement")->capture_default_str();
  b->add_option("--methods", bench_args.methods,
                "Methods as formulation[:backend], comma separated (all by default)")
      ->delimiter(',');
  b->add_option("--summary", bench_args.summary, "Write a median summary (gnuplot friendly) to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*s) return run_synth(shared, synth);
    if (*f) return run_fit(shared, fit);
    if (*g) return run_segment(shared, seg);
    if (*b) return run_bench_cmd(shared, bench_args);
  } catch (const ConfigError& e) {
    std::cerr << "rgbdfit: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "rgbdfit: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

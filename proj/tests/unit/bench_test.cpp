#include <gtest/gtest.h>

#include <sstream>

#include "rgbdfit/bench.hpp"

namespace rgbdfit {
namespace {

using namespace rgbdfit::bench;

TEST(OpCount, PredictedValues) {
  EXPECT_EQ(predicted_op_count(Formulation::implicit_standard).per_frame_channels, 9);
  EXPECT_EQ(predicted_op_count(Formulation::implicit_standard).ops_per_pixel, 44);
  EXPECT_EQ(predicted_op_count(Formulation::implicit_rgbd).per_frame_channels, 4);
  EXPECT_EQ(predicted_op_count(Formulation::implicit_rgbd).ops_per_pixel, 20);
  EXPECT_EQ(predicted_op_count(Formulation::explicit_standard).per_frame_channels, 8);
  EXPECT_EQ(predicted_op_count(Formulation::explicit_standard).ops_per_pixel, 39);
  EXPECT_EQ(predicted_op_count(Formulation::explicit_rgbd).per_frame_channels, 3);
  EXPECT_EQ(predicted_op_count(Formulation::explicit_rgbd).ops_per_pixel, 15);
}

TEST(OpCount, AuditMatchesRegisteredChannels) {
  for (auto f : kAllFormulations) {
    const auto audit = op_count_audit(f);
    const auto want = predicted_op_count(f);
    EXPECT_EQ(audit.per_frame_channels, want.per_frame_channels) << to_string(f);
    EXPECT_EQ(audit.ops_per_pixel, want.ops_per_pixel) << to_string(f);
    EXPECT_EQ(audit.constant_channels, want.constant_channels) << to_string(f);
  }
}

BenchConfig small_config() {
  BenchConfig cfg;
  cfg.width = 160;
  cfg.height = 120;
  cfg.tile = 40;
  cfg.plane_counts = {0, 1, 5};
  cfg.repetitions = 3;
  cfg.warmup = 1;
  cfg.per_fit_samples = 20;
  return cfg;
}

TEST(Bench, ConfigValidation) {
  auto cfg = small_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.repetitions = 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.warmup = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.tile = 500;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.plane_counts = {-1};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Bench, ReportStructure) {
  const auto report = run_bench(small_config());
  ASSERT_EQ(report.methods.size(), 8u);
  for (const auto& m : report.methods) {
    EXPECT_EQ(m.build.size(), 3u);
    if (m.method.backend == Backend::naive) {
      for (double b : m.build) EXPECT_EQ(b, 0.0);
    } else {
      for (double b : m.build) EXPECT_GT(b, 0.0);
    }
    for (double p : m.per_fit) EXPECT_GT(p, 0.0);
    ASSERT_EQ(m.total.size(), 3u);
    // Plane count 0: total is the build time alone.
    EXPECT_EQ(m.total[0].first, 0);
    EXPECT_EQ(m.total[0].second.median, m.build_stats.median);
    EXPECT_LE(m.build_stats.min, m.build_stats.median);
    EXPECT_LE(m.build_stats.median, m.build_stats.max);
  }
  // 8 methods x 3 reps x (1 build + 3 counts x 2 phases)
  EXPECT_EQ(report.samples.size(), 8u * 3u * 7u);
}

TEST(Bench, WorkloadIsDeterministic) {
  const auto a = run_bench(small_config());
  const auto b = run_bench(small_config());
  for (std::size_t i = 0; i < a.methods.size(); ++i) EXPECT_EQ(a.methods[i].checksum, b.methods[i].checksum);
  // Both backends fit the same windows of the same frame.
  for (auto f : kAllFormulations) {
    EXPECT_NEAR(a.find(f, Backend::naive)->checksum, a.find(f, Backend::integral)->checksum, 1e-6);
  }
}

TEST(Bench, CsvAndSummary) {
  auto cfg = small_config();
  cfg.methods = {{Formulation::implicit_standard, Backend::integral}, {Formulation::implicit_rgbd, Backend::integral}};
  const auto report = run_bench(cfg);
  std::ostringstream csv;
  write_csv(csv, report);
  std::istringstream is(csv.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "method,backend,phase,plane_count,rep,seconds");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, static_cast<int>(report.samples.size()));
  std::ostringstream summary;
  write_summary(summary, report);
  EXPECT_NE(summary.str().find("implicit build ratio"), std::string::npos);
  EXPECT_THROW(report.build_ratio(false), ConfigError);
}

TEST(Stats, Summarize) {
  const auto s = summarize({3.0, 1.0, 2.0, 10.0});
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.median, 2.5);
  EXPECT_EQ(s.max, 10.0);
  EXPECT_EQ(summarize({5.0, 1.0, 3.0}).median, 3.0);
}

}  // namespace
}  // namespace rgbdfit

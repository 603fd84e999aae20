#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "drnav/error.hpp"
#include "drnav/estimator.hpp"
#include "drnav/eval.hpp"
#include "drnav/scenarios.hpp"
#include "drnav/simulator.hpp"
#include "support.hpp"

namespace drnav {
namespace {

const GeoPoint kStart{41.8781, -87.6298};

// Truth rows every 0.01 s heading north at 10 m/s; poses every 2 s.
std::vector<TruthRow> straight_truth(double seconds) {
  std::vector<TruthRow> rows;
  for (int i = 0; i <= static_cast<int>(seconds * 100); ++i) {
    TruthRow r;
    r.t = i * 0.01;
    r.position = from_local_enu(kStart, Enu(0.0, 10.0 * r.t));
    r.speed = 10.0;
    rows.push_back(r);
  }
  return rows;
}

std::vector<EstimatedPose> poses_on(const std::vector<TruthRow>& truth, Enu offset) {
  std::vector<EstimatedPose> out;
  for (std::size_t i = 200; i < truth.size(); i += 200) {
    EstimatedPose p;
    p.t = truth[i].t;
    p.position = from_local_enu(truth[i].position, offset);
    p.mode = PoseMode::kDeadReckoned;
    p.slot_distance = 20.0;
    out.push_back(p);
  }
  return out;
}

// ---- per-slot error ----

TEST(PerSlotError, IdenticalSeriesGiveZeros) {
  const auto truth = straight_truth(60);
  for (double e : per_slot_error(poses_on(truth, Enu::Zero()), truth, 2.0)) EXPECT_EQ(e, 0.0);
}

TEST(PerSlotError, TenMetresEastEverywhere) {
  const auto truth = straight_truth(60);
  const auto errors = per_slot_error(poses_on(truth, Enu(10.0, 0.0)), truth, 2.0);
  ASSERT_EQ(errors.size(), 30u);
  for (double e : errors) EXPECT_NEAR(e, 10.0, 1e-6);
}

TEST(PerSlotError, MissingTruthIsAlignmentError) {
  const auto truth = straight_truth(10);
  EstimatedPose p;
  p.t = 30.0;
  p.position = kStart;
  try {
    per_slot_error(std::vector<EstimatedPose>{p}, truth, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlignment);
  }
}

TEST(PerSlotError, DowntownMatchesIndependentRecompute) {
  const auto sim = simulate(downtown(), NoiseSpec{});
  const auto poses = run(sim.trace, sim.db, EstimatorConfig{});
  const auto errors = per_slot_error(poses, truth_rows(sim.truth), 2.0);
  ASSERT_EQ(errors.size(), poses.size());
  const double r = 6371000.0;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    // The last slot may end just past the final truth sample.
    const auto i = std::min(static_cast<std::size_t>(std::llround(poses[k].t * 100.0)), sim.truth.samples.size() - 1);
    const auto& t = sim.truth.samples[i];
    ASSERT_LE(std::abs(t.t - poses[k].t), 1.0);
    const double p1 = poses[k].position.lat * kDegToRad, p2 = t.position.lat * kDegToRad;
    const double dl = (t.position.lon - poses[k].position.lon) * kDegToRad;
    const double h = std::pow(std::sin((p2 - p1) / 2), 2) + std::cos(p1) * std::cos(p2) * std::pow(std::sin(dl / 2), 2);
    EXPECT_NEAR(errors[k], 2 * r * std::asin(std::sqrt(h)), 1e-6);
  }
}

// ---- CDF ----

TEST(ErrorCdf, AllEqual) {
  const std::vector<double> e{5, 5, 5, 5};
  const auto cdf = error_cdf(e);
  ASSERT_EQ(cdf.size(), 1u);
  EXPECT_EQ(cdf[0].error, 5.0);
  EXPECT_EQ(cdf[0].fraction, 1.0);
}

TEST(ErrorCdf, HalfAtTwo) {
  const std::vector<double> e{3, 1, 4, 2};
  const auto cdf = error_cdf(e);
  ASSERT_EQ(cdf.size(), 4u);
  EXPECT_EQ(cdf[1].error, 2.0);
  EXPECT_EQ(cdf[1].fraction, 0.5);
  EXPECT_EQ(cdf.back().fraction, 1.0);
}

TEST(ErrorCdf, EmptyRejected) {
  try {
    error_cdf(std::vector<double>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(ErrorCdf, MatchesRankOracleOnRandomInput) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> u(0, 20);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> e(37);
    for (auto& x : e) x = u(rng) * 0.5;
    const auto cdf = error_cdf(e);
    double prev = 0.0;
    for (const auto& pt : cdf) {
      const auto below = std::count_if(e.begin(), e.end(), [&](double x) { return x <= pt.error; });
      EXPECT_DOUBLE_EQ(pt.fraction, static_cast<double>(below) / e.size());
      EXPECT_GT(pt.fraction, prev);
      prev = pt.fraction;
    }
    EXPECT_EQ(cdf.back().fraction, 1.0);
    EXPECT_EQ(cdf.back().error, *std::max_element(e.begin(), e.end()));
  }
}

// ---- bad segments ----

TEST(BadSegments, NoneBelowThreshold) {
  const std::vector<double> e{1, 29.9, 5}, d{10, 10, 10};
  EXPECT_TRUE(bad_segment_stats(e, d).empty());
}

TEST(BadSegments, TenSlotsOf22Metres) {
  std::vector<double> e(14, 1.0), d(14, 22.0);
  std::fill(e.begin() + 2, e.begin() + 12, 45.0);
  const auto s = bad_segment_stats(e, d, 30.0);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].start_index, 2u);
  EXPECT_EQ(s[0].slot_count, 10u);
  EXPECT_DOUBLE_EQ(s[0].length_m, 220.0);
}

TEST(BadSegments, MatchesRunLengthScan) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> err(0, 60), dist(0, 30);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> e(50), d(50);
    for (auto& x : e) x = err(rng);
    for (auto& x : d) x = dist(rng);
    std::vector<BadSegment> oracle;
    std::size_t i = 0;
    while (i < e.size()) {
      if (e[i] < 30.0) {
        ++i;
        continue;
      }
      BadSegment s{i, 0, 0.0};
      while (i < e.size() && e[i] >= 30.0) {
        s.slot_count++;
        s.length_m += d[i];
        ++i;
      }
      oracle.push_back(s);
    }
    const auto got = bad_segment_stats(e, d, 30.0);
    ASSERT_EQ(got.size(), oracle.size());
    double total = 0.0;
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].start_index, oracle[k].start_index);
      EXPECT_EQ(got[k].slot_count, oracle[k].slot_count);
      EXPECT_NEAR(got[k].length_m, oracle[k].length_m, 1e-9);
      total += got[k].length_m;
    }
    double trace_length = 0.0;
    for (double x : d) trace_length += x;
    EXPECT_LE(total, trace_length + 1e-9);
  }
}

TEST(BadSegments, MisalignedSeriesRejected) {
  const std::vector<double> e{40, 40}, d{1};
  EXPECT_THROW(bad_segment_stats(e, d), Error);
}

// ---- report ----

TEST(Evaluate, MeanIsArithmeticMeanOfSlots) {
  const auto sim = simulate(downtown(), NoiseSpec{});
  const auto poses = run(sim.trace, sim.db, EstimatorConfig{});
  const auto r = evaluate(poses, truth_rows(sim.truth));
  double sum = 0.0;
  for (double e : r.per_slot_errors) sum += e;
  const double mean = sum / static_cast<double>(r.per_slot_errors.size());
  EXPECT_NEAR(r.mean_slot_error, mean, 1e-12 * mean);
  EXPECT_EQ(r.cdf.back().fraction, 1.0);
  EXPECT_GT(r.dead_reckoned_slots, 0u);
  std::size_t runs = 0;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const bool dr = poses[k].mode != PoseMode::kGpsGood;
    if (dr && (k + 1 == poses.size() || poses[k + 1].mode == PoseMode::kGpsGood)) ++runs;
  }
  EXPECT_GE(runs, 5u);
  EXPECT_EQ(r.dropout_end_errors.size(), runs);
  const auto j = summary_json(r);
  EXPECT_TRUE(j.contains("mean_slot_error_m"));
}

TEST(Evaluate, UniformOffsetReport) {
  const auto truth = straight_truth(60);
  const auto poses = poses_on(truth, Enu(10.0, 0.0));
  const auto r = evaluate(poses, truth);
  EXPECT_NEAR(r.mean_slot_error, 10.0, 1e-6);
  EXPECT_EQ(r.dead_reckoned_slots, poses.size());
  EXPECT_DOUBLE_EQ(r.dead_reckoned_within_fraction, 1.0);
  EXPECT_TRUE(r.bad_segments.empty());
  ASSERT_EQ(r.dropout_end_errors.size(), 1u);
  EXPECT_NEAR(r.dropout_end_errors[0], 10.0, 1e-6);
}

TEST(Evaluate, WritesReportFiles) {
  test::TempDir dir("report");
  const auto truth = straight_truth(30);
  const auto poses = poses_on(truth, Enu(1.0, 0.0));
  write_report(dir.path(), evaluate(poses, truth), poses);
  for (const char* f : {"per_slot.csv", "cdf.csv", "segments.csv", "summary.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
}

// ---- error growth ----

TEST(ErrorGrowth, IidStepsGiveLinearVariance) {
  std::mt19937_64 rng(1);
  const double sigma = 2.0;
  std::normal_distribution<double> n(0.5, sigma);
  std::vector<std::vector<double>> runs(1000, std::vector<double>(40));
  for (auto& r : runs) {
    for (auto& x : r) x = n(rng);
  }
  const auto fit = error_growth(runs);
  ASSERT_EQ(fit.variance.size(), 40u);
  EXPECT_GE(fit.r2, 0.98);
  EXPECT_NEAR(fit.slope, sigma * sigma, 0.1 * sigma * sigma);
}

TEST(ErrorGrowth, NeedsTwoEqualLengthRuns) {
  EXPECT_THROW(error_growth({{1.0, 2.0}}), Error);
  EXPECT_THROW(error_growth({{1.0, 2.0}, {1.0}}), Error);
}

}  // namespace
}  // namespace drnav

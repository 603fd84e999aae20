#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "drnav/error.hpp"
#include "drnav/estimator.hpp"
#include "drnav/orientation.hpp"
#include "drnav/scenarios.hpp"
#include "drnav/simulator.hpp"
#include "support.hpp"

namespace drnav {
namespace {

const TruthSample& at(const GroundTruth& g, double t) {
  const auto i = static_cast<std::size_t>(std::llround(t * 100.0));
  return g.samples.at(i);
}

ScenarioSpec quiet(ScenarioSpec s) {
  s.vibration_std = 0.0;
  s.gyro_vibration_std = 0.0;
  return s;
}

// ---- ground truth ----

TEST(GroundTruth, AccelerationThenCruise) {
  ScenarioBuilder b("accel");
  b.accel_to(20.0, 2.0).cruise_s(11.0);
  const auto g = generate_ground_truth(b.build());
  EXPECT_NEAR(at(g, 10.0).speed, 20.0, 1e-9);
  EXPECT_NEAR(at(g, 10.0).distance, 100.0, 1e-6);
  // 10 s at 20 m/s
  EXPECT_NEAR(at(g, 20.0).distance - at(g, 10.0).distance, 200.0, 1e-6);
  EXPECT_NEAR(at(g, 15.0).speed, 20.0, 1e-12);
}

TEST(GroundTruth, SpeedIsExactlyZeroDuringStops) {
  const auto g = generate_ground_truth(five_lights());
  ASSERT_EQ(g.stops.size(), 5u);
  for (const auto& [a, b] : g.stops) {
    for (const auto& s : g.samples) {
      if (s.t >= a && s.t < b) ASSERT_EQ(s.speed, 0.0) << "t=" << s.t;
    }
  }
}

TEST(GroundTruth, SpeedIsContinuousAndNonNegative) {
  const auto g = generate_ground_truth(downtown());
  for (std::size_t i = 1; i < g.samples.size(); ++i) {
    ASSERT_GE(g.samples[i].speed, 0.0);
    ASSERT_LT(std::abs(g.samples[i].speed - g.samples[i - 1].speed), 0.05);
  }
}

TEST(GroundTruth, KinematicConsistency) {
  const auto g = generate_ground_truth(downtown());
  const auto& s = g.samples;
  double v = s.front().speed;
  double path = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double dt = s[i].t - s[i - 1].t;
    v += s[i - 1].accel * dt;
    path += (s[i].enu - s[i - 1].enu).norm();
    // Re-anchor every minute; the drift inside one minute stays tiny.
    if (i % 6000 == 0) {
      ASSERT_NEAR(v, s[i].speed, 1e-6) << "t=" << s[i].t;
      v = s[i].speed;
    }
    const double ds = 0.5 * (s[i].speed + s[i - 1].speed) * dt;
    ASSERT_NEAR(s[i].distance - s[i - 1].distance, ds, 1e-6);
  }
  const double total = s.back().distance;
  EXPECT_NEAR(path, total, 1e-3 * total);
}

TEST(GroundTruth, TurnBehindTheVehicleIsInfeasible) {
  ScenarioSpec spec;
  ScenarioEvent go;
  go.type = EventType::kAccelTo;
  go.speed = 10.0;
  ScenarioEvent cruise;
  cruise.type = EventType::kCruise;
  cruise.distance = 200.0;
  ScenarioEvent turn;
  turn.type = EventType::kTurnAt;
  turn.at_m = 50.0;
  turn.delta_deg = 90.0;
  spec.events = {go, cruise, turn};
  try {
    generate_ground_truth(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleEvent);
  }
}

TEST(ScenarioSpec, GpsFasterThanImuRejected) {
  ScenarioSpec spec = cruise_only();
  spec.gps_rate = 200.0;
  EXPECT_THROW(validate(spec), Error);
}

TEST(ScenarioSpec, JsonRoundTripForEveryBuiltin) {
  for (const auto& name : builtin_scenario_names()) {
    const auto spec = builtin_scenario(name);
    EXPECT_TRUE(scenario_from_json(to_json(spec)) == spec) << name;
  }
}

TEST(ScenarioSpec, FileRoundTrip) {
  test::TempDir dir("scenario");
  save_scenario(dir / "d.json", downtown());
  EXPECT_TRUE(load_scenario(dir / "d.json") == downtown());
}

// ---- IMU synthesis ----

TEST(SynthesizeImu, NoiselessRecoveryIsExact) {
  const auto spec = quiet(five_lights());
  const auto sim = simulate(spec, noiseless(1));
  const auto track = track_orientation(sim.trace.imu, OrientationConfig{});
  std::size_t n = 0;
  for (std::size_t i = 0; i < track.accel.size(); ++i) {
    if (!track.warm[i]) continue;
    ASSERT_NEAR(track.accel[i].forward, sim.truth.samples[i].accel, 1e-9) << "t=" << sim.truth.samples[i].t;
    ++n;
  }
  EXPECT_GT(n, 1000u);
}

TEST(SynthesizeImu, ScaleErrorMultipliesAcceleration) {
  const auto spec = quiet(five_lights());
  NoiseSpec n = noiseless(1);
  n.epsilon = 0.05;
  const auto sim = simulate(spec, n);
  for (std::size_t i = 0; i < sim.trace.imu.size(); ++i) {
    ASSERT_NEAR(sim.trace.imu[i].accel_body.x(), 1.05 * sim.truth.samples[i].accel, 1e-12);
  }
}

TEST(SynthesizeImu, SeededRunsAreBitIdentical) {
  NoiseSpec n;
  n.seed = 99;
  const auto a = simulate(downtown(), n);
  const auto b = simulate(downtown(), n);
  EXPECT_TRUE(a.trace == b.trace);
  n.seed = 100;
  EXPECT_FALSE(simulate(downtown(), n).trace == a.trace);
}

TEST(SynthesizeImu, AdditiveNoiseStatistics) {
  ScenarioBuilder b("parked");
  b.wait(300.0);
  const auto spec = quiet(b.build());
  NoiseSpec n = noiseless(5);
  n.delta_std = 0.15;
  const auto imu = synthesize_imu(generate_ground_truth(spec), spec, n);
  ASSERT_GE(imu.size(), 10000u);
  const double count = static_cast<double>(imu.size());
  for (int axis = 0; axis < 2; ++axis) {
    double sum = 0.0, sq = 0.0;
    for (const auto& s : imu) sum += s.accel_body[axis];
    const double mean = sum / count;
    for (const auto& s : imu) sq += (s.accel_body[axis] - mean) * (s.accel_body[axis] - mean);
    const double sd = std::sqrt(sq / (count - 1.0));
    EXPECT_LT(std::abs(mean), 3.0 * n.delta_std / std::sqrt(count));
    EXPECT_LT(std::abs(sd - n.delta_std), 3.0 * n.delta_std / std::sqrt(2.0 * count));
  }
}

// ---- GPS synthesis ----

TEST(SynthesizeGps, NoiselessFixesEqualTruth) {
  const auto sim = simulate(cruise_only(), noiseless(1));
  ASSERT_FALSE(sim.trace.gps.empty());
  for (const auto& f : sim.trace.gps) {
    EXPECT_LT(geodesic_distance(f.position(), at(sim.truth, f.t).position), 1e-6);
    ASSERT_TRUE(f.speed.has_value());
    EXPECT_EQ(*f.speed, at(sim.truth, f.t).speed);
  }
}

TEST(SynthesizeGps, NoFixesInsideDropout) {
  ScenarioBuilder b("dropout");
  b.accel_to(10.0, 2.0).cruise_s(60.0);
  auto spec = b.build();
  spec.dropouts.push_back({20.0, 40.0, std::nullopt, std::nullopt});
  const auto sim = simulate(spec, NoiseSpec{});
  for (const auto& f : sim.trace.gps) EXPECT_FALSE(f.t >= 20.0 && f.t <= 40.0) << f.t;
  EXPECT_GT(sim.trace.gps.size(), 15u);
}

TEST(SynthesizeGps, RadialErrorRmsOverTenThousandFixes) {
  ScenarioBuilder b("parked");
  b.wait(1000.0);
  auto spec = b.build();
  spec.gps_rate = 10.0;
  NoiseSpec n = noiseless(3);
  n.gps_error_std = 10.0;
  const auto truth = generate_ground_truth(spec);
  const auto fixes = synthesize_gps(truth, spec, n);
  ASSERT_GE(fixes.size(), 10000u);
  double ss = 0.0;
  for (const auto& f : fixes) {
    const double e = geodesic_distance(f.position(), at(truth, f.t).position);
    ss += e * e;
  }
  const double rms = std::sqrt(ss / static_cast<double>(fixes.size()));
  EXPECT_GE(rms, 9.0);
  EXPECT_LE(rms, 11.0);
}

// ---- landmark database ----

TEST(LandmarkDatabase, FiveLightsGiveFiveEntries) {
  const auto sim = simulate(five_lights(), NoiseSpec{});
  const auto n = std::count_if(sim.db.begin(), sim.db.end(), [](const auto& l) { return l.db_kind == "traffic_light"; });
  EXPECT_EQ(n, 5);
}

TEST(LandmarkDatabase, FingerprintsCorrelateWithNoiselessDetections) {
  for (const auto& spec : {downtown(), bridge_and_tunnel()}) {
    const auto sim = simulate(spec, noiseless(1));
    const auto analysis = analyze_trace(sim.trace, EstimatorConfig{});
    ASSERT_EQ(sim.db.size(), sim.truth.landmarks.size());
    for (std::size_t k = 0; k < sim.db.size(); ++k) {
      const auto& planted = sim.truth.landmarks[k];
      ASSERT_EQ(planted.id, sim.db[k].id);
      double best = -1.0;
      for (const auto& p : analysis.patterns) {
        if (p.kind != planted.kind || std::abs(p.t_anchor - planted.t_anchor) > 3.0) continue;
        best = std::max(best, normalized_cross_correlation(p.features, sim.db[k].fingerprint));
      }
      EXPECT_GT(best, 0.95) << spec.name << " " << planted.id;
    }
  }
}

TEST(Emit, WritesThreeFilesThatLoadBack) {
  test::TempDir dir("emit");
  const auto sim = simulate(five_lights(), NoiseSpec{});
  const auto files = emit(sim, dir.path());
  EXPECT_TRUE(load_trace(files.trace) == sim.trace);
  EXPECT_EQ(load_landmark_db(files.landmarks).size(), sim.db.size());
  const auto rows = load_truth(files.truth);
  ASSERT_EQ(rows.size(), sim.truth.samples.size());
  EXPECT_EQ(rows.back().t, sim.truth.samples.back().t);
}

}  // namespace
}  // namespace drnav

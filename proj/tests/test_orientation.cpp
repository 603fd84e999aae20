#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "drnav/error.hpp"
#include "drnav/orientation.hpp"
#include "drnav/scenarios.hpp"
#include "drnav/simulator.hpp"
#include "support.hpp"

namespace drnav {
namespace {

using test::level_sample;

OrientationConfig gyro_only() {
  OrientationConfig c;
  c.mag_blend = 0.0;
  return c;
}

HeadingState warm_state(const OrientationConfig& cfg, double seconds = 2.0) {
  HeadingState s = HeadingState::with_heading(0.0);
  for (int i = 0; i <= static_cast<int>(seconds * 100); ++i) s = update_orientation(s, level_sample(i * 0.01), cfg);
  return s;
}

// ---- update_orientation ----

TEST(Orientation, GyroOnlyIntegratesRate) {
  const auto cfg = gyro_only();
  HeadingState s = HeadingState::with_heading(0.0);
  for (int i = 0; i <= 300; ++i) s = update_orientation(s, level_sample(i * 0.01, 0.0, M_PI / 6.0), cfg);
  EXPECT_NEAR(s.heading, 90.0, 1e-6);
}

TEST(Orientation, FullMagnetometerBlendSnapsToNorth) {
  OrientationConfig cfg;
  cfg.mag_blend = 1.0;
  HeadingState s = HeadingState::with_heading(200.0);
  s = update_orientation(s, level_sample(0.0), cfg);
  s = update_orientation(s, level_sample(0.01), cfg);
  EXPECT_NEAR(angle_diff_deg(s.heading, 0.0), 0.0, 1e-9);
}

TEST(Orientation, FirstSampleSeedsHeadingFromMagnetometer) {
  HeadingState s;
  s = update_orientation(s, level_sample(0.0, 0.0, 0.0, 135.0));
  EXPECT_NEAR(s.heading, 135.0, 1e-9);
}

TEST(Orientation, GyroBiasSteadyStateMatchesFilterAlgebra) {
  OrientationConfig cfg;
  cfg.mag_blend = 0.02;
  const double bias = 0.01, dt = 0.01;
  HeadingState s = HeadingState::with_heading(0.0);
  for (int i = 0; i <= 6000; ++i) s = update_orientation(s, level_sample(i * dt, 0.0, bias), cfg);
  // e' = (1 - k)(e + b dt)  =>  e* = (1 - k) b dt / k
  const double k = cfg.mag_blend;
  const double expected = (1.0 - k) * bias * dt / k * kRadToDeg;
  const double err = angle_diff_deg(s.heading, 0.0);
  EXPECT_LT(std::abs(err), 5.0);
  EXPECT_NEAR(err, expected, 1e-6);
}

TEST(Orientation, NonMonotonicTimeRejected) {
  HeadingState s = update_orientation({}, level_sample(1.0));
  try {
    update_orientation(s, level_sample(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonMonotonicTime);
  }
}

TEST(Orientation, HeadingStaysNormalised) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rate(-3.0, 3.0);
  OrientationConfig cfg;
  HeadingState s;
  for (int i = 0; i < 5000; ++i) {
    ImuSample smp = level_sample(i * 0.01, 0.0, rate(rng), std::fmod(i * 7.0, 360.0));
    s = update_orientation(s, smp, cfg);
    ASSERT_GE(s.heading, 0.0);
    ASSERT_LT(s.heading, 360.0);
  }
}

TEST(Orientation, NoiselessNinetyDegreeTurnGyroOnly) {
  auto spec = turns_and_lanes(1, 0, 3);
  spec.vibration_std = 0.0;
  spec.gyro_vibration_std = 0.0;
  const auto sim = simulate(spec, noiseless(1));
  HeadingState s = HeadingState::with_heading(sim.truth.samples.front().heading);
  for (const auto& smp : sim.trace.imu) s = update_orientation(s, smp, gyro_only());
  EXPECT_NEAR(angle_diff_deg(s.heading, sim.truth.samples.back().heading), 0.0, 0.5);
}

// ---- earth_frame_accel ----

TEST(EarthAccel, StationaryPhoneCancelsGravity) {
  OrientationConfig cfg;
  const auto s = warm_state(cfg);
  const auto a = earth_frame_accel(s, level_sample(2.0), cfg);
  EXPECT_NEAR(a.forward, 0.0, 0.05);
  EXPECT_NEAR(a.lateral, 0.0, 0.05);
  EXPECT_NEAR(a.vertical, 0.0, 0.05);
}

TEST(EarthAccel, ForwardAxisAcceleration) {
  OrientationConfig cfg;
  auto s = warm_state(cfg);
  const auto smp = level_sample(2.02, 2.0);
  s = update_orientation(s, smp, cfg);
  const auto a = earth_frame_accel(s, smp, cfg);
  EXPECT_NEAR(a.forward, 2.0, 1e-6);
  EXPECT_NEAR(a.lateral, 0.0, 1e-6);
}

TEST(EarthAccel, TiltedPhoneStillResolvesForward) {
  // Phone pitched 20 degrees about its y axis; gravity and the forward push
  // are rotated together.
  const double p = 20.0 * kDegToRad;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(p, Eigen::Vector3d::UnitY()).toRotationMatrix();
  OrientationConfig cfg;
  HeadingState s = HeadingState::with_heading(0.0);
  auto sample = [&](double t, double fwd) {
    ImuSample smp = level_sample(t);
    smp.accel_body = r.transpose() * Eigen::Vector3d(fwd, 0.0, -test::kG);
    smp.mag_body = r.transpose() * Eigen::Vector3d(20.0, 0.0, 45.0);
    return smp;
  };
  for (int i = 0; i <= 200; ++i) s = update_orientation(s, sample(i * 0.01, 0.0), cfg);
  const auto smp = sample(2.01, 1.5);
  s = update_orientation(s, smp, cfg);
  EXPECT_NEAR(earth_frame_accel(s, smp, cfg).forward, 1.5, 1e-6);
  EXPECT_NEAR(s.heading, 0.0, 1e-6);
}

TEST(EarthAccel, BeforeWarmupRejected) {
  OrientationConfig cfg;
  HeadingState s = update_orientation({}, level_sample(0.0), cfg);
  try {
    earth_frame_accel(s, level_sample(0.0), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWarmupIncomplete);
  }
}

TEST(EarthAccel, SimulatorForwardAccelMatchesTruth) {
  auto spec = five_lights();
  spec.vibration_std = 0.0;
  spec.gyro_vibration_std = 0.0;
  const auto sim = simulate(spec, noiseless(2));
  const auto track = track_orientation(sim.trace.imu, OrientationConfig{});
  ASSERT_EQ(track.accel.size(), sim.truth.samples.size());
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < track.accel.size(); ++i) {
    if (!track.warm[i]) continue;
    const double e = track.accel[i].forward - sim.truth.samples[i].accel;
    ss += e * e;
    ++n;
  }
  ASSERT_GT(n, 1000u);
  EXPECT_LT(std::sqrt(ss / n), 0.1);
}

TEST(EarthAccel, ConstantVelocitySegmentHasNoForwardBias) {
  ScenarioBuilder b("cruise", 30.0);
  b.wait(3.0).accel_to(15.0, 3.0).cruise_s(60.0);
  auto spec = b.build();
  spec.vibration_std = 0.0;
  spec.gyro_vibration_std = 0.0;
  const auto sim = simulate(spec, noiseless(1));
  const auto track = track_orientation(sim.trace.imu, OrientationConfig{});
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < track.accel.size(); ++i) {
    if (!track.warm[i] || sim.truth.samples[i].accel != 0.0) continue;
    sum += track.accel[i].forward;
    ++n;
  }
  ASSERT_GT(n, 1000u);
  EXPECT_LT(std::abs(sum / n), 0.05);
}

// ---- smooth_heading ----

TEST(SmoothHeading, WindowOneIsIdentity) {
  const std::vector<double> h{10.0, 350.0, 45.0, 0.0};
  EXPECT_EQ(smooth_heading(h, 1), h);
}

TEST(SmoothHeading, ConstantSeries) {
  const std::vector<double> h(9, 123.0);
  for (double x : smooth_heading(h, 5)) EXPECT_NEAR(x, 123.0, 1e-9);
}

TEST(SmoothHeading, WrapAroundMiddleIsZero) {
  const std::vector<double> h{358.0, 0.0, 2.0};
  const auto out = smooth_heading(h, 3);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_NEAR(angle_diff_deg(out[1], 0.0), 0.0, 1e-9);
}

TEST(SmoothHeading, MatchesBruteForceCircularMean) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 360.0);
  std::vector<double> h(50);
  for (auto& x : h) x = u(rng);
  const int w = 7;
  const auto out = smooth_heading(h, w);
  for (int i = 0; i < 50; ++i) {
    double s = 0, c = 0;
    for (int j = std::max(0, i - w / 2); j <= std::min(49, i + w / 2); ++j) {
      s += std::sin(h[j] * kDegToRad);
      c += std::cos(h[j] * kDegToRad);
    }
    EXPECT_NEAR(angle_diff_deg(out[i], std::atan2(s, c) * kRadToDeg), 0.0, 1e-9);
  }
}

TEST(SmoothHeading, EvenOrZeroWindowRejected) {
  const std::vector<double> h{1.0, 2.0};
  for (int w : {0, 2, -1}) {
    try {
      smooth_heading(h, w);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidWindow);
    }
  }
}

// ---- mount calibration ----

TEST(MountCalibration, RecoversYawFromFirstLaunch) {
  auto spec = five_lights();
  spec.mount_yaw_deg = 25.0;
  const auto sim = simulate(spec, NoiseSpec{});
  const auto yaw = calibrate_mount_yaw(sim.trace.imu);
  ASSERT_TRUE(yaw.has_value());
  EXPECT_NEAR(angle_diff_deg(*yaw, 25.0), 0.0, 3.0);
}

}  // namespace
}  // namespace drnav

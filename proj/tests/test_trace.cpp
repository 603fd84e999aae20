#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "drnav/error.hpp"
#include "drnav/geo.hpp"
#include "drnav/scenarios.hpp"
#include "drnav/simulator.hpp"
#include "drnav/trace.hpp"
#include "support.hpp"

namespace drnav {
namespace {

// Independent haversine used as the oracle.
double haversine(double lat1, double lon1, double lat2, double lon2) {
  const double r = 6371000.0;
  const double p1 = lat1 * M_PI / 180.0, p2 = lat2 * M_PI / 180.0;
  const double dp = p2 - p1, dl = (lon2 - lon1) * M_PI / 180.0;
  const double h = std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2 * r * std::asin(std::sqrt(h));
}

Trace grid_trace(double seconds, double imu_hz, double gps_every_s) {
  Trace tr;
  const int n = static_cast<int>(std::round(seconds * imu_hz));
  for (int i = 0; i <= n; ++i) tr.imu.push_back(test::level_sample(i / imu_hz));
  for (double t = gps_every_s; t <= seconds + 1e-9; t += gps_every_s) {
    tr.gps.push_back({t, 41.0, -87.0, 5.0, 10.0});
  }
  return tr;
}

// ---- trace file I/O ----

TEST(TraceIo, TwoImuOneGpsLines) {
  std::istringstream in(
      R"({"type":"imu","t":0.0,"ax":0,"ay":0,"az":-9.8,"gx":0,"gy":0,"gz":0.1,"mx":20,"my":0,"mz":45}
{"type":"gps","t":0.5,"lat":41.0,"lon":-87.0,"acc":5.0}
{"type":"imu","t":0.01,"ax":0.1,"ay":0,"az":-9.8,"gx":0,"gy":0,"gz":0.1,"mx":20,"my":0,"mz":45}
)");
  const Trace tr = read_trace(in);
  ASSERT_EQ(tr.imu.size(), 2u);
  ASSERT_EQ(tr.gps.size(), 1u);
  EXPECT_DOUBLE_EQ(tr.imu[1].accel_body.x(), 0.1);
  EXPECT_DOUBLE_EQ(tr.imu[0].gyro_body.z(), 0.1);
  EXPECT_FALSE(tr.gps[0].speed.has_value());
  EXPECT_DOUBLE_EQ(tr.gps[0].accuracy, 5.0);
}

TEST(TraceIo, DecreasingTimestampsRejected) {
  std::istringstream in(
      R"({"type":"imu","t":1.0,"ax":0,"ay":0,"az":-9.8,"gx":0,"gy":0,"gz":0,"mx":20,"my":0,"mz":45}
{"type":"imu","t":0.5,"ax":0,"ay":0,"az":-9.8,"gx":0,"gy":0,"gz":0,"mx":20,"my":0,"mz":45}
)");
  try {
    read_trace(in);
    FAIL() << "expected ordering error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOrdering);
  }
}

TEST(TraceIo, ParseErrorCarriesLineNumber) {
  std::istringstream in(
      R"({"type":"imu","t":0.0,"ax":0,"ay":0,"az":-9.8,"gx":0,"gy":0,"gz":0,"mx":20,"my":0,"mz":45}
{"type":"imu","t":0.1,"ax":0,
)");
  try {
    read_trace(in);
    FAIL() << "expected parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    ASSERT_TRUE(e.line().has_value());
    EXPECT_EQ(*e.line(), 2u);
  }
}

TEST(TraceIo, EmptyTraceRejected) {
  std::istringstream in("\n");
  try {
    read_trace(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyTrace);
  }
}

TEST(TraceIo, InvalidGpsRangeRejected) {
  std::istringstream in(
      R"({"type":"imu","t":0.0,"ax":0,"ay":0,"az":-9.8,"gx":0,"gy":0,"gz":0,"mx":20,"my":0,"mz":45}
{"type":"gps","t":0.5,"lat":95.0,"lon":-87.0,"acc":5.0}
)");
  EXPECT_THROW(read_trace(in), Error);
}

TEST(TraceIo, SimulatorEmitLoadRoundTripIsExact) {
  test::TempDir dir("trace");
  NoiseSpec n;
  n.seed = 4;
  const auto sim = simulate(five_lights(), n);
  const auto files = emit(sim, dir.path());
  const Trace loaded = load_trace(files.trace);
  ASSERT_EQ(loaded.imu.size(), sim.trace.imu.size());
  ASSERT_EQ(loaded.gps.size(), sim.trace.gps.size());
  EXPECT_TRUE(loaded == sim.trace);
}

// ---- geodesy ----

TEST(Geo, DistanceToSelfIsZero) {
  const GeoPoint a{41.8781, -87.6298};
  EXPECT_EQ(geodesic_distance(a, a), 0.0);
}

TEST(Geo, OneDegreeOfLongitudeAtEquator) {
  const double oracle = haversine(0, 0, 0, 1);
  EXPECT_NEAR(oracle, 111194.9, 0.1);
  EXPECT_NEAR(geodesic_distance({0, 0}, {0, 1}), oracle, 1e-6);
}

TEST(Geo, SymmetryAndTriangleInequalityOnRandomPoints) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-80, 80), lon(-180, 180);
  for (int i = 0; i < 500; ++i) {
    const GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)}, c{lat(rng), lon(rng)};
    const double ab = geodesic_distance(a, b), ba = geodesic_distance(b, a);
    EXPECT_DOUBLE_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, haversine(a.lat, a.lon, b.lat, b.lon), 1e-6 * std::max(1.0, ab));
    const double ac = geodesic_distance(a, c), cb = geodesic_distance(c, b);
    EXPECT_LE(ab, (ac + cb) * (1.0 + 1e-6));
  }
}

TEST(Geo, EnuOfOriginIsZero) {
  const GeoPoint o{41.8781, -87.6298};
  const Enu e = to_local_enu(o, o);
  EXPECT_EQ(e.x(), 0.0);
  EXPECT_EQ(e.y(), 0.0);
}

TEST(Geo, OneDegreeNorthIsMeridianArc) {
  const GeoPoint o{10.0, 20.0};
  const Enu e = to_local_enu(o, {10.5, 20.0});
  const double arc = 6371000.0 * 0.5 * M_PI / 180.0;
  EXPECT_NEAR(e.x(), 0.0, 1e-6);
  EXPECT_NEAR(e.y(), arc, 1e-3);
}

TEST(Geo, EnuRoundTripWithinOneCentimetreAt10Km) {
  const GeoPoint o{41.8781, -87.6298};
  for (double east = -10000; east <= 10000; east += 2500) {
    for (double north = -10000; north <= 10000; north += 2500) {
      const GeoPoint p = from_local_enu(o, Enu(east, north));
      const GeoPoint q = from_local_enu(o, to_local_enu(o, p));
      EXPECT_LT(geodesic_distance(p, q), 0.01);
      const Enu back = to_local_enu(o, p);
      EXPECT_NEAR(back.x(), east, 0.01);
      EXPECT_NEAR(back.y(), north, 0.01);
    }
  }
}

TEST(Geo, EnuRejectsPointsBeyond100Km) {
  const GeoPoint o{41.0, -87.0};
  try {
    to_local_enu(o, {42.0, -87.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRange);
  }
}

TEST(Geo, AngleHelpers) {
  EXPECT_DOUBLE_EQ(wrap_deg(-10.0), 350.0);
  EXPECT_DOUBLE_EQ(wrap_deg(720.0), 0.0);
  EXPECT_DOUBLE_EQ(angle_diff_deg(10.0, 350.0), 20.0);
  EXPECT_DOUBLE_EQ(angle_diff_deg(350.0, 10.0), -20.0);
  const double h[] = {358.0, 0.0, 2.0};
  EXPECT_NEAR(angle_diff_deg(circular_mean_deg(h), 0.0), 0.0, 1e-9);
  const Enu east = heading_unit(90.0);
  EXPECT_NEAR(east.x(), 1.0, 1e-12);
  EXPECT_NEAR(east.y(), 0.0, 1e-12);
}

// ---- slot partitioning ----

TEST(Slots, TenSecondsInTwoSecondSlots) {
  const auto slots = partition_slots(grid_trace(10.0, 100.0, 2.0), 2.0);
  ASSERT_EQ(slots.size(), 5u);
  for (const auto& s : slots) EXPECT_NEAR(s.duration(), 2.0, 0.01 + 1e-9);
}

TEST(Slots, FixAtEveryBoundaryGivesEverySlotAFix) {
  const auto slots = partition_slots(grid_trace(20.0, 50.0, 2.0), 2.0);
  for (const auto& s : slots) {
    ASSERT_TRUE(s.gps_at_end.has_value());
    EXPECT_NEAR(s.gps_at_end->t, s.t_end, 1e-9);
  }
}

TEST(Slots, PartitionIsExhaustiveAndDisjoint) {
  const Trace tr = grid_trace(13.37, 100.0, 2.0);
  const auto slots = partition_slots(tr, 2.0);
  std::size_t expect = 0;
  for (const auto& s : slots) {
    EXPECT_EQ(s.imu_begin, expect);
    EXPECT_GT(s.imu_count(), 0u);
    expect = s.imu_end;
  }
  EXPECT_EQ(expect, tr.imu.size());
}

TEST(Slots, SimulatedDropoutLeavesSlotsWithoutFix) {
  ScenarioBuilder b("dropout", 0.0);
  b.wait(5.0).accel_to(10.0, 2.0).cruise_s(60.0);
  ScenarioSpec spec = b.build();
  spec.dropouts.push_back({20.0, 40.0, std::nullopt, std::nullopt});
  const auto sim = simulate(spec, noiseless(1));
  for (const auto& s : partition_slots(sim.trace, 2.0)) {
    if (s.t_end >= 20.0 + 1.0 && s.t_end <= 40.0 - 1.0) {
      EXPECT_FALSE(s.gps_at_end.has_value()) << "slot ending at " << s.t_end;
    }
    if (s.t_end < 19.0 || (s.t_end > 41.0 && s.t_end < 60.0)) {
      EXPECT_TRUE(s.gps_at_end.has_value()) << "slot ending at " << s.t_end;
    }
  }
}

}  // namespace
}  // namespace drnav

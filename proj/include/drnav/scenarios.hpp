#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drnav/simulator.hpp"

namespace drnav {

/// Incremental scenario script. Keeps a kinematic estimate of the route
/// distance so that location-anchored events can be placed ahead of the
/// vehicle.
class ScenarioBuilder {
 public:
  explicit ScenarioBuilder(std::string name, double heading_deg = 0.0);

  ScenarioBuilder& wait(double seconds);
  ScenarioBuilder& accel_to(double speed, double accel);
  ScenarioBuilder& cruise_m(double metres);
  ScenarioBuilder& cruise_s(double seconds);
  /// Stop for a traffic light `ahead_m` in front of the vehicle.
  ScenarioBuilder& light(double ahead_m, double dwell_s, double decel = 2.0, const std::string& bucket = "offpeak");
  /// Non-light stop (no landmark).
  ScenarioBuilder& stop(double ahead_m, double dwell_s, double decel = 2.0);
  ScenarioBuilder& turn_at(double ahead_m, double delta_deg, double rate = 0.35);
  ScenarioBuilder& lane_change(int direction, double net_deg = 0.0);
  ScenarioBuilder& slope(double ahead_m, double length_m, double amplitude, SlopeSignature sig);
  ScenarioBuilder& dropout_m(double ahead_m, double length_m);

  double distance() const { return s_; }
  double speed() const { return v_; }
  const ScenarioSpec& spec() const { return spec_; }
  ScenarioSpec build() const { return spec_; }

 private:
  ScenarioSpec spec_;
  double s_ = 0.0;
  double v_ = 0.0;
};

struct DowntownOptions {
  double training_m = 3000.0;
  int dropouts = 5;
  double dropout_m = 380.0;
  double recovery_m = 300.0;
};

/// City grid: 200 m blocks with traffic lights, turns and lane changes; GPS
/// good for `training_m`, then repeated dropouts of `dropout_m`.
ScenarioSpec downtown(const DowntownOptions& opt = {});

struct HighwayOptions {
  double training_m = 3000.0;
  double dropout_m = 2000.0;
};

/// Fast, low-variability drive with a single long dropout after training.
ScenarioSpec highway(const HighwayOptions& opt = {});

/// Straight road with five stop-causing traffic lights.
ScenarioSpec five_lights();

/// Straight cruise with speed changes but no stops.
ScenarioSpec cruise_only();

/// `turns` turns of 90 +/- 15 degrees and `lanes` lane changes with net
/// heading change within +/- 10 degrees, in a seeded random order.
struct ManoeuvreLog {
  std::vector<double> turn_deltas;
  std::vector<double> lane_nets;
};
ScenarioSpec turns_and_lanes(int turns, int lanes, std::uint64_t seed, ManoeuvreLog* log = nullptr);

/// Bridge followed by an underpass.
ScenarioSpec bridge_and_tunnel();

/// Names accepted by builtin_scenario.
std::vector<std::string> builtin_scenario_names();
ScenarioSpec builtin_scenario(const std::string& name);

}  // namespace drnav

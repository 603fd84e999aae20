#include "drnav/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "drnav/error.hpp"

namespace drnav {

namespace {
constexpr double kTurnRampS = 0.5;
}

ScenarioBuilder::ScenarioBuilder(std::string name, double heading_deg) {
  spec_.name = std::move(name);
  spec_.initial_heading_deg = heading_deg;
}

ScenarioBuilder& ScenarioBuilder::wait(double seconds) {
  ScenarioEvent e;
  e.type = EventType::kWait;
  e.duration = seconds;
  spec_.events.push_back(e);
  s_ += v_ * seconds;
  return *this;
}

ScenarioBuilder& ScenarioBuilder::accel_to(double speed, double accel) {
  ScenarioEvent e;
  e.type = EventType::kAccelTo;
  e.speed = speed;
  e.accel = accel;
  spec_.events.push_back(e);
  s_ += std::abs(speed * speed - v_ * v_) / (2.0 * accel);
  v_ = speed;
  return *this;
}

ScenarioBuilder& ScenarioBuilder::cruise_m(double metres) {
  ScenarioEvent e;
  e.type = EventType::kCruise;
  e.distance = metres;
  spec_.events.push_back(e);
  s_ += metres;
  return *this;
}

ScenarioBuilder& ScenarioBuilder::cruise_s(double seconds) {
  ScenarioEvent e;
  e.type = EventType::kCruise;
  e.duration = seconds;
  spec_.events.push_back(e);
  s_ += v_ * seconds;
  return *this;
}

ScenarioBuilder& ScenarioBuilder::light(double ahead_m, double dwell_s, double decel, const std::string& bucket) {
  ScenarioEvent e;
  e.type = EventType::kStopAt;
  e.at_m = s_ + ahead_m;
  e.duration = dwell_s;
  e.accel = decel;
  e.light = true;
  e.bucket = bucket;
  spec_.events.push_back(e);
  const auto it = spec_.queue.buckets.find(bucket);
  const double mu = it == spec_.queue.buckets.end() ? 0.0 : it->second.mu;
  s_ = e.at_m - mu * spec_.queue.vehicle_length / 2.0;
  v_ = 0.0;
  return *this;
}

ScenarioBuilder& ScenarioBuilder::stop(double ahead_m, double dwell_s, double decel) {
  ScenarioEvent e;
  e.type = EventType::kStopAt;
  e.at_m = s_ + ahead_m;
  e.duration = dwell_s;
  e.accel = decel;
  e.light = false;
  spec_.events.push_back(e);
  s_ = e.at_m;
  v_ = 0.0;
  return *this;
}

ScenarioBuilder& ScenarioBuilder::turn_at(double ahead_m, double delta_deg, double rate) {
  ScenarioEvent e;
  e.type = EventType::kTurnAt;
  e.at_m = s_ + ahead_m;
  e.delta_deg = delta_deg;
  e.rate = rate;
  spec_.events.push_back(e);
  const double duration = std::abs(delta_deg) * kDegToRad / rate + kTurnRampS;
  s_ = e.at_m + v_ * duration / 2.0;
  return *this;
}

ScenarioBuilder& ScenarioBuilder::lane_change(int direction, double net_deg) {
  ScenarioEvent e;
  e.type = EventType::kLaneChange;
  e.direction = direction;
  e.delta_deg = net_deg;
  e.duration = 3.0;
  spec_.events.push_back(e);
  s_ += v_ * 3.0;
  return *this;
}

ScenarioBuilder& ScenarioBuilder::slope(double ahead_m, double length_m, double amplitude, SlopeSignature sig) {
  spec_.slopes.push_back({s_ + ahead_m, s_ + ahead_m + length_m, amplitude, sig});
  return *this;
}

ScenarioBuilder& ScenarioBuilder::dropout_m(double ahead_m, double length_m) {
  DropoutSpec d;
  d.start_m = s_ + ahead_m;
  d.end_m = s_ + ahead_m + length_m;
  spec_.dropouts.push_back(d);
  return *this;
}

namespace {

// One 200 m city block ending in a light, a turn, or a plain crossing.
void block(ScenarioBuilder& b, int k, int& turn_sign) {
  static constexpr double kSpeeds[] = {11.0, 13.5, 9.5, 12.5, 14.0, 10.5};
  const double v = kSpeeds[k % 6];
  const double block_m = 200.0;
  const double start = b.distance();
  if (b.speed() < 1.0) {
    b.accel_to(v, 1.8);
  } else if (std::abs(b.speed() - v) > 0.1) {
    b.accel_to(v, 1.0);
  }
  switch (k % 4) {
    case 0: {  // traffic light at the block end
      const double ahead = block_m - (b.distance() - start);
      b.light(ahead, 6.0 + 2.0 * (k % 3), 2.0);
      break;
    }
    case 1: {  // turn at the intersection
      b.cruise_m(60.0);
      b.accel_to(7.0, 1.5);
      const double ahead = block_m - (b.distance() - start);
      b.turn_at(ahead, 90.0 * turn_sign, 0.35);
      turn_sign = -turn_sign;
      break;
    }
    case 2: {  // lane change mid-block
      b.cruise_m(60.0);
      b.lane_change(k % 8 < 4 ? 1 : -1, 0.0);
      const double rest = block_m - (b.distance() - start);
      if (rest > 0.0) b.cruise_m(rest);
      break;
    }
    default: {  // crossing at speed
      const double rest = block_m - (b.distance() - start);
      if (rest > 0.0) b.cruise_m(rest);
      break;
    }
  }
}

}  // namespace

ScenarioSpec downtown(const DowntownOptions& opt) {
  ScenarioBuilder b("downtown");
  b.wait(10.0);
  int k = 0;
  int turn_sign = 1;
  while (b.distance() < opt.training_m) block(b, k++, turn_sign);
  for (int d = 0; d < opt.dropouts; ++d) {
    // Each outage starts at a light block so it spans a stop and a turn.
    while (k % 4 != 0) block(b, k++, turn_sign);
    b.dropout_m(60.0, opt.dropout_m);
    const double target = b.distance() + 60.0 + opt.dropout_m + opt.recovery_m;
    while (b.distance() < target) block(b, k++, turn_sign);
  }
  if (b.speed() > 0.0) b.stop(60.0, 5.0, 2.0);
  return b.build();
}

ScenarioSpec highway(const HighwayOptions& opt) {
  ScenarioBuilder b("highway", 45.0);
  b.wait(10.0);
  b.accel_to(29.0, 1.5);
  // Gentle speed changes and shallow curves.
  static constexpr double kSpeeds[] = {30.5, 28.0, 31.0, 29.5, 27.5, 30.0};
  int k = 0;
  auto leg = [&]() {
    b.cruise_m(250.0);
    b.accel_to(kSpeeds[k % 6], 0.4);
    if (k % 3 == 1) b.turn_at(150.0, k % 2 == 0 ? 12.0 : -12.0, 0.03);
    ++k;
  };
  while (b.distance() < opt.training_m) leg();
  b.dropout_m(20.0, opt.dropout_m);
  const double target = b.distance() + opt.dropout_m + 500.0;
  while (b.distance() < target) leg();
  b.accel_to(0.0, 1.5);
  b.wait(5.0);
  return b.build();
}

ScenarioSpec five_lights() {
  ScenarioBuilder b("five_lights", 90.0);
  b.wait(10.0);
  for (int i = 0; i < 5; ++i) {
    b.accel_to(12.0 + i % 2, 1.8);
    b.cruise_m(150.0);
    b.light(80.0, 8.0 + i, 2.0);
  }
  b.accel_to(12.0, 1.8);
  b.cruise_m(200.0);
  return b.build();
}

ScenarioSpec cruise_only() {
  ScenarioBuilder b("cruise_only", 180.0);
  b.wait(10.0);
  b.accel_to(12.0, 1.5);
  b.cruise_m(400.0);
  b.accel_to(16.0, 0.8);
  b.cruise_m(600.0);
  b.accel_to(10.0, 0.8);
  b.cruise_m(400.0);
  b.accel_to(14.0, 1.0);
  b.cruise_m(300.0);
  return b.build();
}

ScenarioSpec turns_and_lanes(int turns, int lanes, std::uint64_t seed, ManoeuvreLog* log) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> turn_jitter(-15.0, 15.0);
  std::uniform_real_distribution<double> lane_net(-10.0, 10.0);
  std::vector<int> order(static_cast<std::size_t>(turns), 0);
  order.insert(order.end(), static_cast<std::size_t>(lanes), 1);
  std::shuffle(order.begin(), order.end(), rng);

  ScenarioBuilder b("turns_and_lanes");
  b.wait(10.0);
  b.accel_to(8.0, 1.5);
  ManoeuvreLog local;
  int sign = 1;
  for (int kind : order) {
    b.cruise_m(120.0);
    if (kind == 0) {
      const double delta = sign * (90.0 + turn_jitter(rng));
      sign = -sign;
      local.turn_deltas.push_back(delta);
      b.turn_at(40.0, delta, 0.45);
    } else {
      const double net = lane_net(rng);
      local.lane_nets.push_back(net);
      b.lane_change(sign, net);
      sign = -sign;
    }
  }
  b.cruise_m(120.0);
  if (log) *log = local;
  return b.build();
}

ScenarioSpec bridge_and_tunnel() {
  ScenarioBuilder b("bridge_and_tunnel", 30.0);
  b.wait(10.0);
  b.accel_to(12.0, 1.5);
  b.slope(200.0, 96.0, 0.6, SlopeSignature::kUpDown);
  b.cruise_m(600.0);
  b.slope(100.0, 96.0, 0.6, SlopeSignature::kDownUp);
  b.cruise_m(400.0);
  return b.build();
}

std::vector<std::string> builtin_scenario_names() {
  return {"downtown", "highway", "five_lights", "cruise_only", "turns_and_lanes", "bridge_and_tunnel"};
}

ScenarioSpec builtin_scenario(const std::string& name) {
  if (name == "downtown") return downtown();
  if (name == "highway") return highway();
  if (name == "five_lights") return five_lights();
  if (name == "cruise_only") return cruise_only();
  if (name == "turns_and_lanes") return turns_and_lanes(20, 20, 7);
  if (name == "bridge_and_tunnel") return bridge_and_tunnel();
  throw Error(ErrorCode::kInvalidValue, fmt::format("unknown builtin scenario \"{}\"", name));
}

}  // namespace drnav

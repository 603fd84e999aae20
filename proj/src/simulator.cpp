#include "drnav/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "drnav/error.hpp"
#include "drnav/orientation.hpp"

namespace drnav {

using nlohmann::json;

namespace {

constexpr double kTurnRampS = 0.5;
constexpr double kFieldHorizontalUt = 20.0;
constexpr double kFieldVerticalUt = 45.0;
constexpr double kMinGpsAccuracy = 1.0;

[[noreturn]] void infeasible(const std::string& msg) { throw Error(ErrorCode::kInfeasibleEvent, msg); }

}  // namespace

void validate(const NoiseSpec& n) {
  const double stds[] = {n.delta_std, n.gyro_noise_std, n.mag_noise_deg, n.gps_error_std, n.gps_speed_std};
  for (double s : stds) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorCode::kInvalidValue, "noise stds must be >= 0");
  }
  if (!std::isfinite(n.epsilon) || !std::isfinite(n.gyro_bias)) {
    throw Error(ErrorCode::kInvalidValue, "noise epsilon and gyro bias must be finite");
  }
  if (n.epsilon <= -1.0) throw Error(ErrorCode::kInvalidValue, "epsilon must exceed -1");
}

NoiseSpec noiseless(std::uint64_t seed) {
  NoiseSpec n;
  n.epsilon = 0.0;
  n.delta_std = 0.0;
  n.gyro_bias = 0.0;
  n.gyro_noise_std = 0.0;
  n.mag_noise_deg = 0.0;
  n.gps_error_std = 0.0;
  n.gps_speed_std = 0.0;
  n.seed = seed;
  return n;
}

std::string_view to_string(EventType type) {
  switch (type) {
    case EventType::kWait: return "wait";
    case EventType::kCruise: return "cruise";
    case EventType::kAccelTo: return "accel_to";
    case EventType::kStopAt: return "stop_at";
    case EventType::kTurnAt: return "turn_at";
    case EventType::kTurn: return "turn";
    case EventType::kLaneChange: return "lane_change";
  }
  return "unknown";
}

namespace {

EventType event_type_from(const std::string& s) {
  for (auto t : {EventType::kWait, EventType::kCruise, EventType::kAccelTo, EventType::kStopAt, EventType::kTurnAt,
                 EventType::kTurn, EventType::kLaneChange}) {
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorCode::kParse, fmt::format("unknown scenario event type \"{}\"", s));
}

std::string_view signature_name(SlopeSignature s) { return s == SlopeSignature::kUpDown ? "up_down" : "down_up"; }

SlopeSignature signature_from(const std::string& s) {
  if (s == "up_down") return SlopeSignature::kUpDown;
  if (s == "down_up") return SlopeSignature::kDownUp;
  throw Error(ErrorCode::kParse, fmt::format("unknown slope signature \"{}\"", s));
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario JSON

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec s;
  try {
    s.name = j.value("name", s.name);
    if (j.contains("start")) s.start = GeoPoint::make(j["start"].at("lat").get<double>(), j["start"].at("lon").get<double>());
    s.initial_heading_deg = j.value("initial_heading_deg", s.initial_heading_deg);
    s.imu_rate = j.value("imu_rate", s.imu_rate);
    s.gps_rate = j.value("gps_rate", s.gps_rate);
    s.vibration_std = j.value("vibration_std", s.vibration_std);
    s.gyro_vibration_std = j.value("gyro_vibration_std", s.gyro_vibration_std);
    s.mount_yaw_deg = j.value("mount_yaw_deg", s.mount_yaw_deg);
    if (j.contains("queue")) {
      const auto& q = j["queue"];
      s.queue.vehicle_length = q.value("vehicle_length", s.queue.vehicle_length);
      if (q.contains("buckets")) {
        s.queue.buckets.clear();
        for (const auto& [name, b] : q["buckets"].items()) {
          s.queue.buckets[name] = QueueBucket{b.at("mu").get<double>(), b.value("sigma", 0.0)};
        }
      }
    }
    for (const auto& e : j.value("events", json::array())) {
      ScenarioEvent ev;
      ev.type = event_type_from(e.at("type").get<std::string>());
      if (e.contains("duration")) ev.duration = e["duration"].get<double>();
      if (e.contains("distance")) ev.distance = e["distance"].get<double>();
      if (e.contains("heading_deg")) ev.heading_deg = e["heading_deg"].get<double>();
      ev.speed = e.value("speed", ev.speed);
      ev.accel = e.value("accel", ev.accel);
      ev.at_m = e.value("at_m", ev.at_m);
      ev.delta_deg = e.value("delta_deg", ev.delta_deg);
      ev.rate = e.value("rate", ev.rate);
      ev.light = e.value("light", ev.light);
      ev.bucket = e.value("bucket", ev.bucket);
      ev.direction = e.value("direction", ev.direction);
      ev.amplitude_deg = e.value("amplitude_deg", ev.amplitude_deg);
      s.events.push_back(ev);
    }
    for (const auto& e : j.value("slopes", json::array())) {
      SlopeSpec sl;
      sl.start_m = e.at("start_m").get<double>();
      sl.end_m = e.at("end_m").get<double>();
      sl.amplitude = e.value("amplitude", sl.amplitude);
      sl.signature = signature_from(e.value("signature", std::string("up_down")));
      s.slopes.push_back(sl);
    }
    for (const auto& e : j.value("dropouts", json::array())) {
      DropoutSpec d;
      if (e.contains("t_start")) d.t_start = e["t_start"].get<double>();
      if (e.contains("t_end")) d.t_end = e["t_end"].get<double>();
      if (e.contains("start_m")) d.start_m = e["start_m"].get<double>();
      if (e.contains("end_m")) d.end_m = e["end_m"].get<double>();
      s.dropouts.push_back(d);
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kParse, fmt::format("scenario: {}", ex.what()));
  }
  validate(s);
  return s;
}

json to_json(const ScenarioSpec& s) {
  json j;
  j["name"] = s.name;
  j["start"] = {{"lat", s.start.lat}, {"lon", s.start.lon}};
  j["initial_heading_deg"] = s.initial_heading_deg;
  j["imu_rate"] = s.imu_rate;
  j["gps_rate"] = s.gps_rate;
  j["vibration_std"] = s.vibration_std;
  j["gyro_vibration_std"] = s.gyro_vibration_std;
  j["mount_yaw_deg"] = s.mount_yaw_deg;
  json buckets = json::object();
  for (const auto& [name, b] : s.queue.buckets) buckets[name] = {{"mu", b.mu}, {"sigma", b.sigma}};
  j["queue"] = {{"vehicle_length", s.queue.vehicle_length}, {"buckets", buckets}};

  json events = json::array();
  for (const auto& e : s.events) {
    json o;
    o["type"] = std::string(to_string(e.type));
    switch (e.type) {
      case EventType::kWait:
        o["duration"] = e.duration.value_or(0.0);
        break;
      case EventType::kCruise:
        if (e.duration) o["duration"] = *e.duration;
        if (e.distance) o["distance"] = *e.distance;
        break;
      case EventType::kAccelTo:
        o["speed"] = e.speed;
        o["accel"] = e.accel;
        break;
      case EventType::kStopAt:
        o["at_m"] = e.at_m;
        o["duration"] = e.duration.value_or(0.0);
        o["accel"] = e.accel;
        o["light"] = e.light;
        o["bucket"] = e.bucket;
        break;
      case EventType::kTurnAt:
      case EventType::kTurn:
        if (e.type == EventType::kTurnAt) o["at_m"] = e.at_m;
        if (e.heading_deg) {
          o["heading_deg"] = *e.heading_deg;
        } else {
          o["delta_deg"] = e.delta_deg;
        }
        o["rate"] = e.rate;
        break;
      case EventType::kLaneChange:
        o["direction"] = e.direction;
        o["delta_deg"] = e.delta_deg;
        o["duration"] = e.duration.value_or(3.0);
        o["amplitude_deg"] = e.amplitude_deg;
        break;
    }
    events.push_back(o);
  }
  j["events"] = events;

  json slopes = json::array();
  for (const auto& sl : s.slopes) {
    slopes.push_back({{"start_m", sl.start_m},
                      {"end_m", sl.end_m},
                      {"amplitude", sl.amplitude},
                      {"signature", std::string(signature_name(sl.signature))}});
  }
  j["slopes"] = slopes;

  json dropouts = json::array();
  for (const auto& d : s.dropouts) {
    json o = json::object();
    if (d.t_start) o["t_start"] = *d.t_start;
    if (d.t_end) o["t_end"] = *d.t_end;
    if (d.start_m) o["start_m"] = *d.start_m;
    if (d.end_m) o["end_m"] = *d.end_m;
    dropouts.push_back(o);
  }
  j["dropouts"] = dropouts;
  return j;
}

bool ScenarioSpec::operator==(const ScenarioSpec& other) const { return to_json(*this) == to_json(other); }

void validate(const ScenarioSpec& s) {
  if (!(s.imu_rate > 0.0) || !(s.gps_rate > 0.0)) throw Error(ErrorCode::kInvalidValue, "rates must be positive");
  if (s.imu_rate < s.gps_rate) throw Error(ErrorCode::kInvalidValue, "imu_rate must be >= gps_rate");
  if (!is_valid(s.start)) throw Error(ErrorCode::kInvalidValue, "scenario start is not a valid coordinate");
  if (s.events.empty()) throw Error(ErrorCode::kInvalidValue, "scenario has no events");
  if (s.vibration_std < 0.0 || s.gyro_vibration_std < 0.0) {
    throw Error(ErrorCode::kInvalidValue, "vibration stds must be >= 0");
  }
  validate(s.queue);
  for (const auto& sl : s.slopes) {
    if (!(sl.end_m > sl.start_m) || sl.start_m < 0.0 || sl.amplitude < 0.0) {
      throw Error(ErrorCode::kInvalidValue, "slope needs 0 <= start_m < end_m and amplitude >= 0");
    }
  }
  for (const auto& d : s.dropouts) {
    const bool by_time = d.t_start && d.t_end;
    const bool by_distance = d.start_m && d.end_m;
    if (by_time == by_distance) {
      throw Error(ErrorCode::kInvalidValue, "dropout needs exactly one of t_start/t_end or start_m/end_m");
    }
    if (by_time && !(*d.t_end > *d.t_start)) throw Error(ErrorCode::kInvalidValue, "dropout t_end <= t_start");
    if (by_distance && !(*d.end_m > *d.start_m)) throw Error(ErrorCode::kInvalidValue, "dropout end_m <= start_m");
  }
  for (const auto& e : s.events) {
    switch (e.type) {
      case EventType::kWait:
        if (!e.duration || *e.duration < 0.0) throw Error(ErrorCode::kInvalidValue, "wait needs duration >= 0");
        break;
      case EventType::kCruise:
        if (e.duration.has_value() == e.distance.has_value()) {
          throw Error(ErrorCode::kInvalidValue, "cruise needs exactly one of duration or distance");
        }
        if (e.duration.value_or(0.0) < 0.0 || e.distance.value_or(0.0) < 0.0) {
          throw Error(ErrorCode::kInvalidValue, "cruise duration/distance must be >= 0");
        }
        break;
      case EventType::kAccelTo:
        if (e.speed < 0.0 || !(e.accel > 0.0)) throw Error(ErrorCode::kInvalidValue, "accel_to needs speed >= 0, accel > 0");
        break;
      case EventType::kStopAt:
        if (!(e.accel > 0.0) || e.duration.value_or(0.0) < 0.0) {
          throw Error(ErrorCode::kInvalidValue, "stop_at needs accel > 0 and duration >= 0");
        }
        break;
      case EventType::kTurnAt:
      case EventType::kTurn:
        if (!(e.rate > 0.0)) throw Error(ErrorCode::kInvalidValue, "turn rate must be positive");
        break;
      case EventType::kLaneChange:
        if (e.direction != 1 && e.direction != -1) throw Error(ErrorCode::kInvalidValue, "lane_change direction is +1 or -1");
        if (!(e.duration.value_or(3.0) > 0.0)) throw Error(ErrorCode::kInvalidValue, "lane_change duration must be positive");
        break;
    }
  }
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open scenario {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  return scenario_from_json(j);
}

void save_scenario(const std::filesystem::path& path, const ScenarioSpec& s) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  out << to_json(s).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Ground truth

namespace {

class Integrator {
 public:
  Integrator(const ScenarioSpec& spec, std::uint64_t seed)
      : spec_(spec), dt_(1.0 / spec.imu_rate), psi_(wrap_deg(spec.initial_heading_deg)), rng_(seed) {}

  double t() const { return static_cast<double>(k_) * dt_; }
  double dt() const { return dt_; }

  void step(double a, double omega) {
    TruthSample ts;
    ts.t = t();
    ts.enu = enu_;
    ts.heading = wrap_deg(psi_);
    ts.speed = v_;
    ts.distance = s_;
    ts.accel = a;
    ts.yaw_rate = omega;
    ts.lateral = v_ * omega;
    ts.vertical = slope_accel(s_);
    truth_.samples.push_back(ts);

    const double ds = v_ * dt_ + 0.5 * a * dt_ * dt_;
    const double mid = psi_ + 0.5 * omega * dt_ * kRadToDeg;
    enu_ += ds * heading_unit(mid);
    s_ += ds;
    v_ += a * dt_;
    if (v_ < 0.0) {
      if (v_ < -1e-9) infeasible(fmt::format("speed went negative at t={}", t()));
      v_ = 0.0;
    }
    psi_ = wrap_deg(psi_ + omega * dt_ * kRadToDeg);
    ++k_;
  }

  void run(const ScenarioEvent& e) {
    switch (e.type) {
      case EventType::kWait: hold(*e.duration); break;
      case EventType::kCruise: cruise(e); break;
      case EventType::kAccelTo: accel_to(e.speed, e.accel); break;
      case EventType::kStopAt: stop_at(e); break;
      case EventType::kTurnAt:
      case EventType::kTurn: turn(e); break;
      case EventType::kLaneChange: lane_change(e); break;
    }
  }

  GroundTruth finish() {
    add_slope_landmarks();
    resolve_dropouts();
    for (auto& s : truth_.samples) s.position = from_local_enu(spec_.start, s.enu);
    return std::move(truth_);
  }

 private:
  double slope_accel(double s) const {
    double out = 0.0;
    for (const auto& sl : spec_.slopes) {
      if (s < sl.start_m || s >= sl.end_m) continue;
      const double sign = sl.signature == SlopeSignature::kUpDown ? 1.0 : -1.0;
      const double mid = 0.5 * (sl.start_m + sl.end_m);
      out += (s < mid ? sign : -sign) * sl.amplitude;
    }
    return out;
  }

  void hold(double duration) {
    const auto n = std::llround(duration / dt_);
    for (long long i = 0; i < n; ++i) step(0.0, 0.0);
  }

  void cruise(const ScenarioEvent& e) {
    if (e.duration) {
      hold(*e.duration);
      return;
    }
    if (*e.distance <= 0.0) return;
    if (!(v_ > 0.0)) infeasible("cruise by distance needs a moving vehicle");
    const double target = s_ + *e.distance;
    while (s_ < target - 1e-9) step(0.0, 0.0);
  }

  void accel_to(double target, double accel) {
    while (std::abs(target - v_) > 1e-12) {
      const double gap = target - v_;
      double a = gap > 0.0 ? accel : -accel;
      const bool last = std::abs(gap) <= accel * dt_;
      if (last) a = gap / dt_;
      step(a, 0.0);
      if (last) v_ = target;
    }
  }

  void stop_at(const ScenarioEvent& e) {
    if (!(v_ > 0.0)) infeasible("stop_at needs a moving vehicle");
    double queue = 0.0;
    if (e.light) {
      const auto it = spec_.queue.buckets.find(e.bucket);
      if (it == spec_.queue.buckets.end()) {
        throw Error(ErrorCode::kUnknownBucket, fmt::format("no queue bucket named \"{}\"", e.bucket));
      }
      std::normal_distribution<double> n(it->second.mu, it->second.sigma > 0.0 ? it->second.sigma : 1e-300);
      queue = std::max(0.0, std::round(n(rng_)));
    }
    const double stop_s = e.at_m - queue * spec_.queue.vehicle_length / 2.0;
    const double decel = e.accel;
    while (s_ + v_ * dt_ + v_ * v_ / (2.0 * decel) < stop_s) step(0.0, 0.0);
    const double remaining = stop_s - s_;
    if (remaining <= 0.0) infeasible(fmt::format("stop at {} m already passed", e.at_m));
    const double d = v_ * v_ / (2.0 * remaining);
    if (d > 2.0 * decel) infeasible(fmt::format("stop at {} m needs {:.2f} m/s^2 braking", e.at_m, d));

    const double t_brake = t();
    accel_to(0.0, d);
    const double stop_begin = t();
    const Enu light = enu_ + (e.at_m - s_) * heading_unit(psi_);
    hold(e.duration.value_or(0.0));
    const double resume = t();
    truth_.stops.emplace_back(stop_begin, resume);
    if (e.light) {
      PlantedLandmark lm;
      lm.id = fmt::format("light_{}", ++lights_);
      lm.db_kind = "traffic_light";
      lm.kind = PatternKind::kStopGo;
      lm.location = from_local_enu(spec_.start, light);
      lm.t_start = t_brake;
      lm.t_end = resume;
      lm.t_anchor = stop_begin;
      lm.queue_vehicles = queue;
      truth_.landmarks.push_back(lm);
    }
  }

  // Heading manoeuvre whose cumulative angle (degrees) at time u in [0, T] is psi(u).
  template <typename Profile>
  void manoeuvre(double duration, Profile psi) {
    const auto n = std::max<long long>(1, std::llround(duration / dt_));
    const double T = static_cast<double>(n) * dt_;
    const double scale_T = duration / T;
    for (long long i = 0; i < n; ++i) {
      const double u0 = static_cast<double>(i) * dt_ * scale_T;
      const double u1 = static_cast<double>(i + 1) * dt_ * scale_T;
      step(0.0, (psi(u1) - psi(u0)) * kDegToRad / dt_);
    }
  }

  void turn(const ScenarioEvent& e) {
    const double delta = e.heading_deg ? angle_diff_deg(*e.heading_deg, psi_) : e.delta_deg;
    const double rate_deg = e.rate * kRadToDeg;
    double ramp = kTurnRampS;
    double duration = std::abs(delta) / rate_deg + ramp;
    if (std::abs(delta) / rate_deg < ramp) {
      ramp = std::abs(delta) / rate_deg;
      duration = 2.0 * ramp;
    }
    if (duration <= 0.0) return;
    const double T = std::max(1.0, std::round(duration / dt_)) * dt_;

    if (e.type == EventType::kTurnAt) {
      if (!(v_ > 0.0)) infeasible("turn_at needs a moving vehicle");
      const double start = e.at_m - v_ * T / 2.0;
      if (s_ > start + v_ * dt_) infeasible(fmt::format("turn at {} m is not ahead on the route", e.at_m));
      while (s_ + v_ * dt_ <= start + 1e-9) step(0.0, 0.0);
    }

    // Trapezoidal rate profile; integral rescaled so the net change is exact.
    const double hold_s = duration - 2.0 * ramp;
    auto raw = [&](double u) {
      if (ramp <= 0.0) return u;
      if (u <= ramp) return 0.5 * u * u / ramp;
      if (u <= ramp + hold_s) return 0.5 * ramp + (u - ramp);
      const double w = std::min(u, duration) - ramp - hold_s;
      return 0.5 * ramp + hold_s + w - 0.5 * w * w / ramp;
    };
    const double total = raw(duration);
    const double t_start = t();
    const std::size_t first = truth_.samples.size();
    manoeuvre(duration, [&](double u) { return delta * raw(u) / total; });
    const double t_end = t();
    truth_.turns.emplace_back(t_start, t_end);

    if (std::abs(delta) >= 45.0) {
      const std::size_t mid = first + (truth_.samples.size() - first) / 2;
      PlantedLandmark lm;
      lm.id = fmt::format("turn_{}", ++turns_);
      lm.db_kind = "turn";
      lm.kind = PatternKind::kTurn;
      lm.location = from_local_enu(spec_.start, truth_.samples[mid].enu);
      lm.t_start = t_start;
      lm.t_end = t_end;
      lm.t_anchor = truth_.samples[mid].t;
      truth_.landmarks.push_back(lm);
    }
  }

  void lane_change(const ScenarioEvent& e) {
    const double duration = e.duration.value_or(3.0);
    const double amp = e.direction * e.amplitude_deg;
    const double net = e.delta_deg;
    const double t_start = t();
    manoeuvre(duration, [&](double u) { return amp * std::sin(kPi * u / duration) + net * u / duration; });
    truth_.lane_changes.push_back({t_start, t(), net});
    truth_.turns.emplace_back(t_start, t());
  }

  std::size_t index_at_distance(double m) const {
    const auto it = std::lower_bound(truth_.samples.begin(), truth_.samples.end(), m,
                                     [](const TruthSample& s, double d) { return s.distance < d; });
    if (it == truth_.samples.end()) return truth_.samples.size() - 1;
    return static_cast<std::size_t>(it - truth_.samples.begin());
  }

  void add_slope_landmarks() {
    int bridges = 0;
    int tunnels = 0;
    for (const auto& sl : spec_.slopes) {
      if (truth_.samples.empty() || truth_.samples.back().distance < sl.end_m) {
        infeasible(fmt::format("slope [{}, {}] m extends past the end of the route", sl.start_m, sl.end_m));
      }
      const bool bridge = sl.signature == SlopeSignature::kUpDown;
      PlantedLandmark lm;
      lm.id = bridge ? fmt::format("bridge_{}", ++bridges) : fmt::format("tunnel_{}", ++tunnels);
      lm.db_kind = bridge ? "bridge" : "tunnel";
      lm.kind = PatternKind::kSlope;
      const auto mid = index_at_distance(0.5 * (sl.start_m + sl.end_m));
      lm.location = from_local_enu(spec_.start, truth_.samples[mid].enu);
      lm.t_start = truth_.samples[index_at_distance(sl.start_m)].t;
      lm.t_end = truth_.samples[index_at_distance(sl.end_m)].t;
      lm.t_anchor = truth_.samples[mid].t;
      truth_.landmarks.push_back(lm);
    }
  }

  void resolve_dropouts() {
    for (const auto& d : spec_.dropouts) {
      if (d.t_start) {
        truth_.dropouts.emplace_back(*d.t_start, *d.t_end);
      } else {
        truth_.dropouts.emplace_back(truth_.samples[index_at_distance(*d.start_m)].t,
                                     truth_.samples[index_at_distance(*d.end_m)].t);
      }
    }
  }

  const ScenarioSpec& spec_;
  double dt_;
  std::uint64_t k_ = 0;
  double s_ = 0.0;
  double v_ = 0.0;
  double psi_ = 0.0;
  Enu enu_ = Enu::Zero();
  std::mt19937_64 rng_;
  GroundTruth truth_;
  int lights_ = 0;
  int turns_ = 0;
};

}  // namespace

GroundTruth generate_ground_truth(const ScenarioSpec& s, std::uint64_t seed) {
  validate(s);
  Integrator integ(s, seed ^ 0x9e3779b97f4a7c15ULL);
  for (const auto& e : s.events) integ.run(e);
  auto truth = integ.finish();
  if (truth.samples.empty()) throw Error(ErrorCode::kInfeasibleEvent, "scenario produced no samples");
  return truth;
}

// ---------------------------------------------------------------------------
// Sensor synthesis

std::vector<ImuSample> synthesize_imu(const GroundTruth& truth, const ScenarioSpec& s, const NoiseSpec& n) {
  validate(n);
  std::seed_seq seq{static_cast<std::uint32_t>(n.seed), static_cast<std::uint32_t>(n.seed >> 32), 1u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> z(0.0, 1.0);
  const double phi = s.mount_yaw_deg * kDegToRad;
  const double c = std::cos(phi);
  const double sn = std::sin(phi);

  std::vector<ImuSample> out;
  out.reserve(truth.samples.size());
  for (const auto& ts : truth.samples) {
    // Normals are always drawn so the stream layout does not depend on which
    // terms are zero.
    const double nax = z(rng), nay = z(rng), naz = z(rng), nvib = z(rng);
    const double ngx = z(rng), ngy = z(rng), ngz = z(rng), nvx = z(rng), nvy = z(rng);
    const double nmag = z(rng);

    const double moving = std::min(1.0, ts.speed);
    const double fx = ts.accel * c + ts.lateral * sn;
    const double fy = -ts.accel * sn + ts.lateral * c;
    const double fz = -(kStandardGravity + ts.vertical);

    ImuSample m;
    m.t = ts.t;
    m.accel_body = Eigen::Vector3d(fx, fy, fz) * (1.0 + n.epsilon) +
                   n.delta_std * Eigen::Vector3d(nax, nay, naz) +
                   Eigen::Vector3d(0.0, 0.0, s.vibration_std * moving * nvib);
    m.gyro_body = Eigen::Vector3d(s.gyro_vibration_std * moving * nvx + n.gyro_noise_std * ngx,
                                  s.gyro_vibration_std * moving * nvy + n.gyro_noise_std * ngy,
                                  ts.yaw_rate + n.gyro_bias + n.gyro_noise_std * ngz);
    const double phone_heading = (ts.heading + s.mount_yaw_deg + n.mag_noise_deg * nmag) * kDegToRad;
    m.mag_body = Eigen::Vector3d(kFieldHorizontalUt * std::cos(phone_heading),
                                 -kFieldHorizontalUt * std::sin(phone_heading), kFieldVerticalUt);
    out.push_back(m);
  }
  return out;
}

std::vector<GpsFix> synthesize_gps(const GroundTruth& truth, const ScenarioSpec& s, const NoiseSpec& n) {
  validate(n);
  std::seed_seq seq{static_cast<std::uint32_t>(n.seed), static_cast<std::uint32_t>(n.seed >> 32), 2u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> z(0.0, 1.0);
  const double axis_std = n.gps_error_std / std::sqrt(2.0);

  std::vector<GpsFix> out;
  if (truth.samples.empty()) return out;
  const double t_last = truth.samples.back().t;
  for (std::uint64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) / s.gps_rate;
    if (t > t_last + 1e-9) break;
    const double ne = z(rng), nn = z(rng), nv = z(rng);
    const auto i = static_cast<std::size_t>(std::llround(t * s.imu_rate));
    if (i >= truth.samples.size()) break;
    const bool dropped = std::any_of(truth.dropouts.begin(), truth.dropouts.end(),
                                     [&](const auto& d) { return t >= d.first && t <= d.second; });
    if (dropped) continue;
    const auto& ts = truth.samples[i];
    GpsFix f;
    f.t = t;
    const GeoPoint p = from_local_enu(s.start, ts.enu + axis_std * Enu(ne, nn));
    f.lat = p.lat;
    f.lon = p.lon;
    f.accuracy = std::max(n.gps_error_std, kMinGpsAccuracy);
    f.speed = std::max(0.0, ts.speed + n.gps_speed_std * nv);
    out.push_back(f);
  }
  return out;
}

std::vector<LandmarkFingerprint> landmark_database(const GroundTruth& truth, const DetectionConfig& cfg) {
  const std::size_t n = truth.samples.size();
  std::vector<double> t(n), fwd(n), rate(n), lateral(n), vertical(n), heading(n);
  std::vector<MotionState> motion(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = truth.samples[i];
    t[i] = s.t;
    fwd[i] = s.accel;
    rate[i] = s.yaw_rate;
    lateral[i] = s.lateral;
    vertical[i] = s.vertical;
    heading[i] = s.heading;
    motion[i] = s.speed == 0.0 ? MotionState::kStopped : MotionState::kMoving;
  }
  std::vector<DetectedPattern> detected = detect_stop_go(t, fwd, motion, cfg);
  for (auto& p : detect_turn(t, heading, rate, lateral, cfg)) detected.push_back(p);
  for (auto& p : detect_slope(t, vertical, cfg)) detected.push_back(p);

  std::vector<LandmarkFingerprint> db;
  for (const auto& lm : truth.landmarks) {
    LandmarkFingerprint f;
    f.id = lm.id;
    f.kind = lm.kind;
    f.db_kind = lm.db_kind;
    f.location = lm.location;
    const DetectedPattern* best = nullptr;
    for (const auto& p : detected) {
      if (p.kind != lm.kind || std::abs(p.t_anchor - lm.t_anchor) > 3.0) continue;
      if (!best || std::abs(p.t_anchor - lm.t_anchor) < std::abs(best->t_anchor - lm.t_anchor)) best = &p;
    }
    if (best) {
      f.fingerprint = best->features;
    } else if (lm.kind == PatternKind::kStopGo) {
      f.fingerprint = stop_go_features(t, fwd, lm.t_anchor, lm.t_end, cfg);
    } else if (lm.kind == PatternKind::kTurn) {
      f.fingerprint = turn_features(t, rate, lm.t_start, lm.t_end, cfg);
    } else {
      f.fingerprint = slope_features(t, vertical, lm.t_start, lm.t_end, cfg);
    }
    db.push_back(std::move(f));
  }
  return db;
}

Simulation simulate(const ScenarioSpec& s, const NoiseSpec& n) {
  Simulation sim;
  sim.truth = generate_ground_truth(s, n.seed);
  sim.trace.imu = synthesize_imu(sim.truth, s, n);
  sim.trace.gps = synthesize_gps(sim.truth, s, n);
  sim.db = landmark_database(sim.truth);
  return sim;
}

// ---------------------------------------------------------------------------
// Files

void write_truth(std::ostream& out, const GroundTruth& truth) {
  out << "t,lat,lon,heading_deg,speed_mps,accel_mps2\n";
  for (const auto& s : truth.samples) {
    out << fmt::format("{},{},{},{},{},{}\n", s.t, s.position.lat, s.position.lon, s.heading, s.speed, s.accel);
  }
}

std::vector<TruthRow> truth_rows(const GroundTruth& truth) {
  std::vector<TruthRow> rows;
  rows.reserve(truth.samples.size());
  for (const auto& s : truth.samples) rows.push_back({s.t, s.position, s.heading, s.speed, s.accel});
  return rows;
}

std::vector<TruthRow> read_truth(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != "t,lat,lon,heading_deg,speed_mps,accel_mps2") {
    throw Error(ErrorCode::kParse, "truth CSV header mismatch", line_no);
  }
  std::vector<TruthRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    try {
      while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kParse, "malformed number", line_no);
    }
    if (v.size() != 6) throw Error(ErrorCode::kParse, "expected 6 columns", line_no);
    rows.push_back({v[0], GeoPoint::make(v[1], v[2]), v[3], v[4], v[5]});
  }
  return rows;
}

std::vector<TruthRow> load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  return read_truth(in);
}

EmittedFiles emit(const Simulation& sim, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
  EmittedFiles files{out_dir / "trace.jsonl", out_dir / "landmarks.json", out_dir / "truth.csv"};
  save_trace(files.trace, sim.trace);
  save_landmark_db(files.landmarks, sim.db);
  std::ofstream out(files.truth);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", files.truth.string()));
  write_truth(out, sim.truth);
  return files;
}

EmittedFiles emit(const ScenarioSpec& s, const NoiseSpec& n, const std::filesystem::path& out_dir) {
  return emit(simulate(s, n), out_dir);
}

}  // namespace drnav

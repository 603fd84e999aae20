#include "drnav/config.hpp"

#include <fstream>
#include <functional>
#include <limits>
#include <type_traits>

#include <fmt/format.h>

#include "drnav/error.hpp"

namespace drnav {

namespace {

using nlohmann::json;

struct Entry {
  std::string key;
  std::string help;
  std::function<json(GlobalConfig&)> get;
  std::function<void(GlobalConfig&, const json&)> set;
};

template <class T>
T convert(const std::string& key, const json& v) {
  auto bad = [&](const char* want) {
    return Error(ErrorCode::kConfig, fmt::format("config key {} expects {}, got {}", key, want, v.dump()));
  };
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw bad("true or false");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw bad("a string");
    return v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw bad("a number");
    return v.get<T>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw bad("a non-negative integer");
    }
    return v.get<T>();
  } else {
    if (!v.is_number_integer()) throw bad("an integer");
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) throw bad("a smaller integer");
    return static_cast<T>(x);
  }
}

template <class Ref>
Entry entry(std::string key, std::string help, Ref ref) {
  using T = std::remove_reference_t<decltype(ref(std::declval<GlobalConfig&>()))>;
  Entry e;
  e.key = key;
  e.help = std::move(help);
  e.get = [ref](GlobalConfig& c) { return json(ref(c)); };
  e.set = [ref, key](GlobalConfig& c, const json& v) { ref(c) = convert<T>(key, v); };
  return e;
}

#define DRNAV_KEY(name, help, expr) entry(name, help, [](GlobalConfig& c) -> auto& { return expr; })

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> r;
    // estimator
    r.push_back(DRNAV_KEY("estimator.slot_s", "timeslot length, s", c.estimator.slot_s));
    r.push_back(DRNAV_KEY("estimator.gps_good_m", "fixes with accuracy above this are bad, m", c.estimator.gps_good_m));
    r.push_back(DRNAV_KEY("estimator.gps_train_m", "fixes used for training need accuracy at most this, m",
                          c.estimator.gps_train_m));
    r.push_back(DRNAV_KEY("estimator.training_distance_m", "training buffer length as driven distance, m",
                          c.estimator.training_distance_m));
    r.push_back(DRNAV_KEY("estimator.assumed_speed_mps", "speed converting training distance to slots, m/s",
                          c.estimator.assumed_speed_mps));
    r.push_back(DRNAV_KEY("estimator.buffer_capacity", "training buffer size in slots, 0 derives it from distance",
                          c.estimator.buffer_capacity));
    r.push_back(DRNAV_KEY("estimator.speed_gps_gain", "pull of tracked speed toward GPS speed in good slots",
                          c.estimator.speed_gps_gain));
    r.push_back(DRNAV_KEY("estimator.landmarks_enabled", "calibrate against the landmark database",
                          c.estimator.landmarks_enabled));
    r.push_back(DRNAV_KEY("estimator.queue_bucket", "time-of-day bucket for traffic light queues",
                          c.estimator.queue_bucket));
    r.push_back(DRNAV_KEY("estimator.queue_profile_path", "optional queue profile JSON replacing queue.*",
                          c.estimator.queue_profile_path));
    r.push_back(DRNAV_KEY("estimator.snap_blend", "1 snaps to the landmark, 0 keeps dead reckoning",
                          c.estimator.snap_blend));
    r.push_back(DRNAV_KEY("estimator.course_anchoring", "re-anchor heading to the GPS course in good slots",
                          c.estimator.course_anchoring));
    r.push_back(DRNAV_KEY("estimator.course_baseline_m", "shortest fix baseline for a course sample, m",
                          c.estimator.course_baseline_m));
    r.push_back(DRNAV_KEY("estimator.course_straight_deg", "heading spread allowed over a course baseline, deg",
                          c.estimator.course_straight_deg));
    r.push_back(DRNAV_KEY("estimator.course_window", "course samples kept", c.estimator.course_window));
    r.push_back(DRNAV_KEY("estimator.course_sigmas", "standard errors before the course offset is applied",
                          c.estimator.course_sigmas));
    // orientation
    r.push_back(DRNAV_KEY("orientation.mag_blend", "per-sample pull toward magnetometer heading",
                          c.estimator.orientation.mag_blend));
    r.push_back(DRNAV_KEY("orientation.gravity_tau_s", "gravity time constant during warm-up, s",
                          c.estimator.orientation.gravity_tau_s));
    r.push_back(DRNAV_KEY("orientation.gravity_static_tau_s", "gravity time constant when still, s",
                          c.estimator.orientation.gravity_static_tau_s));
    r.push_back(DRNAV_KEY("orientation.warmup_s", "warm-up before earth-frame output, s",
                          c.estimator.orientation.warmup_s));
    r.push_back(DRNAV_KEY("orientation.declination_deg", "magnetic declination, deg",
                          c.estimator.orientation.declination_deg));
    r.push_back(DRNAV_KEY("orientation.mount_yaw_deg", "phone x axis clockwise from vehicle forward, deg",
                          c.estimator.orientation.mount_yaw_deg));
    r.push_back(DRNAV_KEY("orientation.static_var_max", "variance of |a| below which the phone is still, (m/s^2)^2",
                          c.estimator.orientation.static_var_max));
    r.push_back(DRNAV_KEY("orientation.static_accel_tol", "low-passed accel to gravity distance when still, m/s^2",
                          c.estimator.orientation.static_accel_tol));
    r.push_back(DRNAV_KEY("orientation.static_sample_tol", "sample to gravity distance when still, m/s^2",
                          c.estimator.orientation.static_sample_tol));
    r.push_back(DRNAV_KEY("orientation.smooth_window", "heading smoothing window, samples, odd",
                          c.estimator.orientation.smooth_window));
    r.push_back(DRNAV_KEY("orientation.mount_calibration", "estimate mount yaw from the first launch",
                          c.estimator.orientation.mount_calibration));
    // motion
    r.push_back(DRNAV_KEY("motion.accel_threshold", "accel variance above which the vehicle moves, (m/s^2)^2",
                          c.estimator.motion.accel_threshold));
    r.push_back(DRNAV_KEY("motion.gyro_threshold", "gyro variance above which the vehicle moves, (rad/s)^2",
                          c.estimator.motion.gyro_threshold));
    r.push_back(DRNAV_KEY("motion.window_s", "classification window, s", c.estimator.motion.window_s));
    r.push_back(DRNAV_KEY("motion.hop_s", "classification hop, s", c.estimator.motion.hop_s));
    // detection
    r.push_back(DRNAV_KEY("detection.accel_smooth_s", "forward accel smoothing, s",
                          c.estimator.detection.accel_smooth_s));
    r.push_back(DRNAV_KEY("detection.brake_threshold", "braking/launch accel magnitude, m/s^2",
                          c.estimator.detection.brake_threshold));
    r.push_back(DRNAV_KEY("detection.brake_s", "minimum braking time, s", c.estimator.detection.brake_s));
    r.push_back(DRNAV_KEY("detection.launch_s", "minimum launch time, s", c.estimator.detection.launch_s));
    r.push_back(DRNAV_KEY("detection.min_stop_s", "minimum stop length, s", c.estimator.detection.min_stop_s));
    r.push_back(DRNAV_KEY("detection.search_s", "window searched for braking and launch, s",
                          c.estimator.detection.search_s));
    r.push_back(DRNAV_KEY("detection.signature_s", "stop/go signature half length, s",
                          c.estimator.detection.signature_s));
    r.push_back(DRNAV_KEY("detection.rate_smooth_s", "yaw rate smoothing, s", c.estimator.detection.rate_smooth_s));
    r.push_back(DRNAV_KEY("detection.rate_threshold", "yaw rate marking a manoeuvre, rad/s",
                          c.estimator.detection.rate_threshold));
    r.push_back(DRNAV_KEY("detection.turn_angle_min", "heading change classed as a turn, deg",
                          c.estimator.detection.turn_angle_min));
    r.push_back(DRNAV_KEY("detection.lane_angle_max", "heading change classed as a lane change, deg",
                          c.estimator.detection.lane_angle_max));
    r.push_back(DRNAV_KEY("detection.merge_gap_s", "gap merging yaw events, s", c.estimator.detection.merge_gap_s));
    r.push_back(DRNAV_KEY("detection.min_event_s", "shortest yaw event, s", c.estimator.detection.min_event_s));
    r.push_back(DRNAV_KEY("detection.heading_pad_s", "padding for heading change measurement, s",
                          c.estimator.detection.heading_pad_s));
    r.push_back(DRNAV_KEY("detection.lateral_tolerance", "lateral accel allowed against the turn sign, m/s^2",
                          c.estimator.detection.lateral_tolerance));
    r.push_back(DRNAV_KEY("detection.slope_smooth_s", "vertical accel smoothing, s",
                          c.estimator.detection.slope_smooth_s));
    r.push_back(DRNAV_KEY("detection.slope_threshold", "vertical accel excursion, m/s^2",
                          c.estimator.detection.slope_threshold));
    r.push_back(DRNAV_KEY("detection.slope_min_s", "shortest excursion, s", c.estimator.detection.slope_min_s));
    r.push_back(DRNAV_KEY("detection.slope_pair_gap_s", "largest gap pairing excursions, s",
                          c.estimator.detection.slope_pair_gap_s));
    // match
    r.push_back(DRNAV_KEY("match.alpha", "weight of fingerprint similarity in the match score",
                          c.estimator.match.alpha));
    r.push_back(DRNAV_KEY("match.radius_m", "landmark search radius, m", c.estimator.match.radius_m));
    r.push_back(DRNAV_KEY("match.d0_m", "distance scale of the proximity term, m", c.estimator.match.d0_m));
    // regression
    r.push_back(DRNAV_KEY("fit.min_obs", "observations needed before fitting", c.estimator.fit.min_obs));
    r.push_back(DRNAV_KEY("fit.min_regressor_variance", "regressor variance below which a column is folded",
                          c.estimator.fit.min_regressor_variance));
    r.push_back(DRNAV_KEY("fit.rank_tolerance", "relative eigenvalue cut for rank", c.estimator.fit.rank_tolerance));
    r.push_back(DRNAV_KEY("fit.max_condition", "condition number above which ridge is added",
                          c.estimator.fit.max_condition));
    r.push_back(DRNAV_KEY("fit.ridge_penalty", "relative ridge penalty", c.estimator.fit.ridge_penalty));
    // queue
    r.push_back(DRNAV_KEY("queue.vehicle_length", "queued vehicle length, m", c.estimator.queue.vehicle_length));
    r.push_back(DRNAV_KEY("queue.buckets.offpeak.mu", "mean queue, vehicles",
                          c.estimator.queue.buckets["offpeak"].mu));
    r.push_back(DRNAV_KEY("queue.buckets.offpeak.sigma", "queue std, vehicles",
                          c.estimator.queue.buckets["offpeak"].sigma));
    r.push_back(DRNAV_KEY("queue.buckets.rush.mu", "mean queue, vehicles", c.estimator.queue.buckets["rush"].mu));
    r.push_back(DRNAV_KEY("queue.buckets.rush.sigma", "queue std, vehicles",
                          c.estimator.queue.buckets["rush"].sigma));
    // simulator noise
    r.push_back(DRNAV_KEY("noise.epsilon", "accelerometer scale error", c.noise.epsilon));
    r.push_back(DRNAV_KEY("noise.delta_std", "accelerometer noise per axis, m/s^2", c.noise.delta_std));
    r.push_back(DRNAV_KEY("noise.gyro_bias", "yaw gyro bias, rad/s", c.noise.gyro_bias));
    r.push_back(DRNAV_KEY("noise.gyro_noise_std", "gyro noise per axis, rad/s", c.noise.gyro_noise_std));
    r.push_back(DRNAV_KEY("noise.mag_noise_deg", "magnetometer heading noise, deg", c.noise.mag_noise_deg));
    r.push_back(DRNAV_KEY("noise.gps_error_std", "GPS 2-D position error RMS, m", c.noise.gps_error_std));
    r.push_back(DRNAV_KEY("noise.gps_speed_std", "GPS speed noise, m/s", c.noise.gps_speed_std));
    r.push_back(DRNAV_KEY("noise.seed", "simulator seed", c.noise.seed));
    // eval
    r.push_back(DRNAV_KEY("eval.bad_threshold_m", "slot error starting a bad segment, m", c.eval.bad_threshold_m));
    r.push_back(DRNAV_KEY("eval.good_error_m", "error bound for the dead-reckoned fraction, m",
                          c.eval.good_error_m));
    return r;
  }();
  return entries;
}

#undef DRNAV_KEY

std::vector<std::string> split_key(std::string_view key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.emplace_back(key.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

void flatten(GlobalConfig& cfg, const json& j, const std::string& prefix) {
  for (const auto& [name, value] : j.items()) {
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    if (value.is_object()) {
      flatten(cfg, value, key);
    } else {
      set_config_value(cfg, key, value);
    }
  }
}

}  // namespace

std::vector<ConfigKey> config_keys() {
  GlobalConfig defaults;
  std::vector<ConfigKey> keys;
  for (const auto& e : registry()) keys.push_back({e.key, e.help, e.get(defaults)});
  return keys;
}

void set_config_value(GlobalConfig& cfg, std::string_view key, const json& value) {
  for (const auto& e : registry()) {
    if (e.key == key) {
      e.set(cfg, value);
      return;
    }
  }
  const auto parts = split_key(key);
  if (parts.size() == 4 && parts[0] == "queue" && parts[1] == "buckets" && !parts[2].empty() &&
      (parts[3] == "mu" || parts[3] == "sigma")) {
    auto& bucket = cfg.estimator.queue.buckets[parts[2]];
    (parts[3] == "mu" ? bucket.mu : bucket.sigma) = convert<double>(std::string(key), value);
    return;
  }
  throw Error(ErrorCode::kConfig, fmt::format("unknown config key \"{}\"", key));
}

void apply_override(GlobalConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::kConfig, fmt::format("override \"{}\" is not key=value", assignment));
  }
  const auto key = assignment.substr(0, eq);
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded() || value.is_object() || value.is_array()) value = text;
  set_config_value(cfg, key, value);
}

void apply_config_json(GlobalConfig& cfg, const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
  flatten(cfg, j, "");
}

json to_json(const GlobalConfig& cfg) {
  GlobalConfig copy = cfg;
  json j = json::object();
  for (const auto& e : registry()) {
    std::string pointer;
    for (const auto& p : split_key(e.key)) pointer += "/" + p;
    j[json::json_pointer(pointer)] = e.get(copy);
  }
  // The registry lists the default buckets; the profile may hold more or fewer.
  j["queue"]["buckets"] = json::object();
  for (const auto& [name, b] : cfg.estimator.queue.buckets) {
    j["queue"]["buckets"][name] = {{"mu", b.mu}, {"sigma", b.sigma}};
  }
  return j;
}

void finalize(GlobalConfig& cfg) {
  if (!cfg.estimator.queue_profile_path.empty()) {
    cfg.estimator.queue = load_queue_profile(cfg.estimator.queue_profile_path);
  }
  cfg.eval.slot_s = cfg.estimator.slot_s;
  validate(cfg.estimator);
  try {
    validate(cfg.noise);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  const auto& d = cfg.estimator.detection;
  const double positives[] = {d.accel_smooth_s, d.brake_threshold, d.brake_s,        d.launch_s,
                              d.min_stop_s,     d.search_s,        d.signature_s,    d.rate_smooth_s,
                              d.rate_threshold, d.turn_angle_min,  d.lane_angle_max, d.merge_gap_s,
                              d.heading_pad_s,  d.slope_smooth_s,  d.slope_threshold, d.slope_min_s};
  for (double v : positives) {
    if (!(v > 0.0)) throw Error(ErrorCode::kConfig, "detection parameters must be positive");
  }
  if (d.lane_angle_max >= d.turn_angle_min) {
    throw Error(ErrorCode::kConfig, "detection.lane_angle_max must be below detection.turn_angle_min");
  }
  if (!(cfg.eval.bad_threshold_m > 0.0) || !(cfg.eval.good_error_m > 0.0)) {
    throw Error(ErrorCode::kConfig, "eval thresholds must be positive");
  }
}

GlobalConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  GlobalConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open config {}", path.string()));
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::kParse, fmt::format("config {} is not valid JSON", path.string()));
    apply_config_json(cfg, j);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  finalize(cfg);
  return cfg;
}

std::string config_help() {
  std::string out = "Config keys (set in the JSON config or with --set key=value):\n";
  std::size_t width = 0;
  for (const auto& k : config_keys()) width = std::max(width, k.key.size());
  for (const auto& k : config_keys()) {
    out += fmt::format("  {:<{}}  {:<10}  {}\n", k.key, width, k.default_value.dump(), k.help);
  }
  return out;
}

}  // namespace drnav

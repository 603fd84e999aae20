#include "drnav/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "drnav/error.hpp"

namespace drnav {

std::string_view to_string(GpsQuality q) {
  switch (q) {
    case GpsQuality::kBad: return "bad";
    case GpsQuality::kGood: return "good";
    case GpsQuality::kTrainableGood: return "trainable_good";
  }
  return "unknown";
}

std::string_view to_string(PoseMode m) {
  switch (m) {
    case PoseMode::kGpsGood: return "gps_good";
    case PoseMode::kDeadReckoned: return "dead_reckoned";
    case PoseMode::kCalibrated: return "calibrated";
  }
  return "unknown";
}

PoseMode pose_mode_from_string(std::string_view s) {
  if (s == "gps_good") return PoseMode::kGpsGood;
  if (s == "dead_reckoned") return PoseMode::kDeadReckoned;
  if (s == "calibrated") return PoseMode::kCalibrated;
  throw Error(ErrorCode::kParse, fmt::format("unknown pose mode \"{}\"", s));
}

void validate(const EstimatorConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kConfig, what);
  };
  require(cfg.slot_s > 0.0, "slot_s must be positive");
  require(cfg.gps_good_m > 0.0 && cfg.gps_train_m > 0.0, "GPS gates must be positive");
  require(cfg.gps_train_m <= cfg.gps_good_m, "gps_train_m must not exceed gps_good_m");
  require(cfg.training_distance_m > 0.0, "training_distance_m must be positive");
  require(cfg.assumed_speed_mps > 0.0, "assumed_speed_mps must be positive");
  require(cfg.speed_gps_gain >= 0.0 && cfg.speed_gps_gain <= 1.0, "speed_gps_gain must be in [0, 1]");
  require(cfg.snap_blend >= 0.0 && cfg.snap_blend <= 1.0, "snap_blend must be in [0, 1]");
  require(cfg.match.alpha >= 0.0 && cfg.match.alpha <= 1.0, "match alpha must be in [0, 1]");
  require(cfg.match.radius_m > 0.0 && cfg.match.d0_m > 0.0, "match radius and d0 must be positive");
  require(cfg.motion.accel_threshold > 0.0 && cfg.motion.gyro_threshold > 0.0, "motion thresholds must be positive");
  require(cfg.motion.window_s >= kMinMotionWindowS && cfg.motion.hop_s > 0.0, "motion window must be >= 0.5 s");
  require(cfg.orientation.smooth_window >= 1 && cfg.orientation.smooth_window % 2 == 1,
          "orientation smooth_window must be odd and >= 1");
  require(cfg.orientation.mag_blend >= 0.0 && cfg.orientation.mag_blend <= 1.0, "mag_blend must be in [0, 1]");
  require(cfg.fit.min_obs >= 2, "min_obs must be at least 2");
  require(cfg.course_baseline_m > 0.0 && cfg.course_straight_deg > 0.0 && cfg.course_window >= 2 &&
              cfg.course_sigmas >= 0.0,
          "course anchoring parameters must be positive");
  try {
    validate(cfg.queue);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  if (!cfg.queue.buckets.contains(cfg.queue_bucket)) {
    throw Error(ErrorCode::kUnknownBucket, fmt::format("queue bucket \"{}\" not in profile", cfg.queue_bucket));
  }
}

std::size_t effective_buffer_capacity(const EstimatorConfig& cfg) {
  if (cfg.buffer_capacity > 0) return cfg.buffer_capacity;
  const double slots = cfg.training_distance_m / (cfg.assumed_speed_mps * cfg.slot_s);
  return std::max<std::size_t>(cfg.fit.min_obs, static_cast<std::size_t>(std::ceil(slots - 1e-9)));
}

QueueProfile load_queue_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open queue profile {}", path.string()));
  QueueProfile profile;
  try {
    const auto j = nlohmann::json::parse(in);
    profile.vehicle_length = j.value("vehicle_length", profile.vehicle_length);
    if (j.contains("buckets")) {
      profile.buckets.clear();
      for (const auto& [name, b] : j.at("buckets").items()) {
        profile.buckets[name] = QueueBucket{b.at("mu").get<double>(), b.value("sigma", 0.0)};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("queue profile {}: {}", path.string(), e.what()));
  }
  validate(profile);
  return profile;
}

GpsQuality gate_gps(const std::optional<GpsFix>& fix, const EstimatorConfig& cfg) {
  if (!fix || !(fix->accuracy <= cfg.gps_good_m)) return GpsQuality::kBad;
  if (fix->accuracy <= cfg.gps_train_m) return GpsQuality::kTrainableGood;
  return GpsQuality::kGood;
}

TraceAnalysis analyze_trace(const Trace& trace, const EstimatorConfig& cfg) {
  validate(trace);
  TraceAnalysis a;
  a.t.reserve(trace.imu.size());
  for (const auto& s : trace.imu) a.t.push_back(s.t);

  OrientationConfig ocfg = cfg.orientation;
  if (ocfg.mount_calibration) {
    if (auto yaw = calibrate_mount_yaw(trace.imu, ocfg)) ocfg.mount_yaw_deg = *yaw;
  }
  a.orientation = track_orientation(trace.imu, ocfg);

  const auto windows = motion_windows(trace.imu, cfg.motion);
  a.motion = sample_motion(trace.imu, windows, cfg.motion);

  const std::size_t n = trace.imu.size();
  a.accel_forward.resize(n);
  a.accel_lateral.resize(n);
  a.accel_vertical.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.accel_forward[i] = a.orientation.accel[i].forward;
    a.accel_lateral[i] = a.orientation.accel[i].lateral;
    a.accel_vertical[i] = a.orientation.accel[i].vertical;
  }

  auto append = [&](std::vector<DetectedPattern> found) {
    a.patterns.insert(a.patterns.end(), found.begin(), found.end());
  };
  append(detect_stop_go(a.t, a.accel_forward, a.motion, cfg.detection));
  append(detect_turn(a.t, a.orientation.smoothed, a.orientation.yaw_rate, a.accel_lateral, cfg.detection));
  append(detect_slope(a.t, a.accel_vertical, cfg.detection));
  std::stable_sort(a.patterns.begin(), a.patterns.end(),
                   [](const DetectedPattern& x, const DetectedPattern& y) { return x.t_anchor < y.t_anchor; });
  return a;
}

std::vector<SlotInput> slot_inputs(const Trace& trace, const TraceAnalysis& analysis, const EstimatorConfig& cfg) {
  const auto slots = partition_slots(trace, cfg.slot_s);
  std::vector<SlotInput> inputs;
  inputs.reserve(slots.size());
  std::size_t next_pattern = 0;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    SlotInput in;
    in.slot = slots[k];
    double sum = 0.0;
    std::size_t warm = 0;
    std::vector<double> headings;
    headings.reserve(in.slot.imu_count());
    bool all_stopped = true;
    for (std::size_t i = in.slot.imu_begin; i < in.slot.imu_end; ++i) {
      if (analysis.orientation.warm[i]) {
        sum += analysis.accel_forward[i];
        ++warm;
      }
      headings.push_back(analysis.orientation.smoothed[i]);
      all_stopped = all_stopped && analysis.motion[i] == MotionState::kStopped;
    }
    in.a_mean = warm > 0 ? sum / static_cast<double>(warm) : 0.0;
    in.heading = circular_mean_deg(headings);
    in.stopped_at_end = analysis.motion[in.slot.imu_end - 1] == MotionState::kStopped;
    in.fully_stopped = all_stopped;

    const bool last = k + 1 == slots.size();
    while (next_pattern < analysis.patterns.size() &&
           (last || analysis.patterns[next_pattern].t_anchor < slots[k + 1].t_start)) {
      if (analysis.patterns[next_pattern].t_anchor >= in.slot.t_start || k == 0) {
        in.patterns.push_back(analysis.patterns[next_pattern]);
      }
      ++next_pattern;
    }
    inputs.push_back(std::move(in));
  }
  return inputs;
}

namespace {

// Projected GPS displacement along the slot heading.
double along_track(const EstimatorState& state, const GpsFix& from, const Enu& to, double heading) {
  const Enu start = to_local_enu(*state.origin, from.position());
  return (to - start).dot(heading_unit(heading));
}

void record_course(EstimatorState& state, const Enu& enu, double heading, const EstimatorConfig& cfg) {
  auto& track = state.course_track;
  track.emplace_back(enu, heading);
  // Most recent earlier fix at least a baseline away.
  std::ptrdiff_t j = static_cast<std::ptrdiff_t>(track.size()) - 2;
  while (j >= 0 && (enu - track[j].first).norm() < cfg.course_baseline_m) --j;
  if (j < 0) return;
  track.erase(track.begin(), track.begin() + j);
  const Enu d = enu - track.front().first;
  std::vector<double> headings;
  for (std::size_t i = 1; i < track.size(); ++i) headings.push_back(track[i].second);
  const double imu = circular_mean_deg(headings);
  for (double h : headings) {
    if (std::abs(angle_diff_deg(h, imu)) > cfg.course_straight_deg) return;
  }
  const double course = std::atan2(d.x(), d.y()) * kRadToDeg;
  state.course_offsets.push_back(angle_diff_deg(course, imu));
  if (state.course_offsets.size() > cfg.course_window) state.course_offsets.pop_front();
}

void refit(EstimatorState& state, const EstimatorConfig& cfg) {
  if (state.buffer.size() < cfg.fit.min_obs) return;
  try {
    ModelPair m;
    m.velocity = fit_velocity(state.buffer, cfg.fit);
    m.distance = fit_distance(state.buffer, cfg.fit);
    state.models = m;
  } catch (const Error& e) {
    // A momentarily degenerate buffer (e.g. constant speed) keeps the last fit.
    if (e.code() != ErrorCode::kDegenerateDesign && e.code() != ErrorCode::kInsufficientData) throw;
  }
}

EstimatedPose good_slot(EstimatorState& state, const SlotInput& in, const GpsFix& fix, GpsQuality quality,
                        const EstimatorConfig& cfg) {
  const double dt = in.slot.duration();
  if (!state.origin) state.origin = fix.position();
  const Enu enu = to_local_enu(*state.origin, fix.position());

  std::optional<double> v_gps = fix.speed;
  if (!v_gps && state.prev_fix) v_gps = std::max(0.0, along_track(state, *state.prev_fix, enu, in.heading) / dt);

  double speed = 0.0;
  if (!state.have_fix) {
    speed = v_gps.value_or(0.0);
  } else {
    const auto vm = state.models ? state.models->velocity : kinematic_velocity_model();
    const double v_pred = predict_velocity(vm, state.speed, in.a_mean, dt);
    speed = v_gps ? v_pred + cfg.speed_gps_gain * (*v_gps - v_pred) : v_pred;
  }
  speed = zero_velocity_update(std::max(0.0, speed), in.stopped_at_end ? MotionState::kStopped : MotionState::kMoving);

  const bool trainable_pair = quality == GpsQuality::kTrainableGood && state.prev_fix &&
                              state.prev_fix->accuracy <= cfg.gps_train_m && state.prev_gps_speed && v_gps;
  if (trainable_pair && !in.fully_stopped) {
    SlotObservation obs;
    obs.v_prev = *state.prev_gps_speed;
    obs.a_mean = in.a_mean;
    obs.dt = dt;
    obs.g_dist = along_track(state, *state.prev_fix, enu, in.heading);
    obs.v_end = *v_gps;
    state.buffer.push(obs);
    refit(state, cfg);
  }

  if (cfg.course_anchoring && !in.fully_stopped) record_course(state, enu, in.heading, cfg);

  EstimatedPose pose;
  pose.t = in.slot.t_end;
  pose.position = fix.position();
  pose.heading = wrap_deg(in.heading + heading_correction(state, cfg));
  pose.speed = speed;
  pose.mode = PoseMode::kGpsGood;
  pose.slot_distance = state.have_fix ? (enu - state.position).norm() : 0.0;

  state.position = enu;
  state.speed = speed;
  state.have_fix = true;
  state.prev_fix = fix;
  state.prev_gps_speed = v_gps;
  return pose;
}

EstimatedPose bad_slot(EstimatorState& state, const SlotInput& in, std::span<const LandmarkFingerprint> db,
                       const EstimatorConfig& cfg) {
  state.prev_fix.reset();
  state.prev_gps_speed.reset();
  state.course_track.clear();

  const double heading = in.heading + heading_correction(state, cfg);
  EstimatedPose pose;
  pose.t = in.slot.t_end;
  pose.heading = wrap_deg(heading);
  pose.mode = PoseMode::kDeadReckoned;

  if (!state.have_fix) {
    pose.position = *state.origin;
    pose.before_first_fix = true;
    return pose;
  }

  const double dt = in.slot.duration();
  const bool trained = state.models.has_value();
  const VelocityModel vm = trained ? state.models->velocity : kinematic_velocity_model();
  const DistanceModel dm = trained ? state.models->distance : kinematic_distance_model();
  pose.fallback_model = !trained;

  double v_end = 0.0;
  double d = 0.0;
  if (!in.fully_stopped) {
    v_end = zero_velocity_update(predict_velocity(vm, state.speed, in.a_mean, dt),
                                 in.stopped_at_end ? MotionState::kStopped : MotionState::kMoving);
    d = predict_distance(dm, state.speed, in.a_mean, dt);
  }
  const Enu dir = heading_unit(heading);
  Enu pos = state.position + d * dir;

  if (cfg.landmarks_enabled && !db.empty()) {
    for (const auto& p : in.patterns) {
      const auto match = match_landmark(p, from_local_enu(*state.origin, pos), db, cfg.match);
      if (!match) continue;
      Enu anchor = to_local_enu(*state.origin, match->landmark.location);
      // Remaining travel from the anchor instant to the slot end.
      const double tau = std::max(0.0, in.slot.t_end - p.t_anchor);
      double v_anchor = 0.0;
      if (p.kind == PatternKind::kStopGo) {
        anchor -= queue_correction(cfg.queue, cfg.queue_bucket) * dir;
      } else {
        const double u = std::clamp((p.t_anchor - in.slot.t_start) / dt, 0.0, 1.0);
        v_anchor = state.speed + u * (v_end - state.speed);
      }
      const Enu target = anchor + 0.5 * (v_anchor + v_end) * tau * dir;
      pos += cfg.snap_blend * (target - pos);
      pose.mode = PoseMode::kCalibrated;
      pose.landmark_id = match->landmark.id;
    }
  }

  pose.position = from_local_enu(*state.origin, pos);
  pose.speed = v_end;
  pose.slot_distance = d;
  state.position = pos;
  state.speed = v_end;
  return pose;
}

}  // namespace

double heading_correction(const EstimatorState& state, const EstimatorConfig& cfg) {
  const auto& o = state.course_offsets;
  if (!cfg.course_anchoring || o.size() < 2) return 0.0;
  const double n = static_cast<double>(o.size());
  double mean = 0.0;
  for (double x : o) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : o) ss += (x - mean) * (x - mean);
  const double se = std::sqrt(ss / (n - 1.0) / n);
  return std::abs(mean) > cfg.course_sigmas * se ? mean : 0.0;
}

EstimatedPose step(EstimatorState& state, const SlotInput& input, std::span<const LandmarkFingerprint> db,
                   const EstimatorConfig& cfg) {
  const auto quality = gate_gps(input.slot.gps_at_end, cfg);
  if (quality != GpsQuality::kBad) return good_slot(state, input, *input.slot.gps_at_end, quality, cfg);
  if (!state.origin) {
    throw Error(ErrorCode::kInsufficientData, "no good GPS fix available to anchor dead reckoning");
  }
  return bad_slot(state, input, db, cfg);
}

RunResult run_with_models(const Trace& trace, std::span<const LandmarkFingerprint> db, const EstimatorConfig& cfg) {
  validate(cfg);
  const auto analysis = analyze_trace(trace, cfg);
  const auto inputs = slot_inputs(trace, analysis, cfg);

  EstimatorState state(effective_buffer_capacity(cfg));
  for (const auto& in : inputs) {
    if (gate_gps(in.slot.gps_at_end, cfg) != GpsQuality::kBad) {
      state.origin = in.slot.gps_at_end->position();
      break;
    }
  }
  if (!state.origin) throw Error(ErrorCode::kInsufficientData, "trace has no good GPS fix");

  RunResult result;
  result.poses.reserve(inputs.size());
  for (const auto& in : inputs) result.poses.push_back(step(state, in, db, cfg));
  result.models = state.models;
  return result;
}

std::vector<EstimatedPose> run(const Trace& trace, std::span<const LandmarkFingerprint> db,
                               const EstimatorConfig& cfg) {
  return run_with_models(trace, db, cfg).poses;
}

// ---------------------------------------------------------------------------
// Pose CSV

namespace {
constexpr std::string_view kPoseHeader = "t,lat,lon,heading_deg,speed_mps,mode,slot_distance_m";
}

void write_poses(std::ostream& out, std::span<const EstimatedPose> poses) {
  out << kPoseHeader << '\n';
  for (const auto& p : poses) {
    out << fmt::format("{},{},{},{},{},{},{}\n", p.t, p.position.lat, p.position.lon, p.heading, p.speed,
                       to_string(p.mode), p.slot_distance);
  }
}

void save_poses(const std::filesystem::path& path, std::span<const EstimatedPose> poses) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  write_poses(out, poses);
}

std::vector<EstimatedPose> read_poses(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kPoseHeader) {
    throw Error(ErrorCode::kParse, "pose CSV header mismatch", line_no);
  }
  std::vector<EstimatedPose> poses;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw Error(ErrorCode::kParse, "expected 7 columns", line_no);
    try {
      EstimatedPose p;
      p.t = std::stod(cells[0]);
      p.position = GeoPoint::make(std::stod(cells[1]), std::stod(cells[2]));
      p.heading = std::stod(cells[3]);
      p.speed = std::stod(cells[4]);
      p.mode = pose_mode_from_string(cells[5]);
      p.slot_distance = std::stod(cells[6]);
      poses.push_back(std::move(p));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kParse, "malformed number", line_no);
    }
  }
  return poses;
}

std::vector<EstimatedPose> load_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  return read_poses(in);
}

}  // namespace drnav

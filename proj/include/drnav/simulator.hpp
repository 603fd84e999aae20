#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drnav/geo.hpp"
#include "drnav/landmarks.hpp"
#include "drnav/trace.hpp"

namespace drnav {

struct NoiseSpec {
  double epsilon = 0.03;         // accelerometer scale error
  double delta_std = 0.15;       // m/s^2, additive accelerometer noise per axis
  double gyro_bias = 0.005;      // rad/s on the yaw axis
  double gyro_noise_std = 0.01;  // rad/s per axis
  double mag_noise_deg = 10.0;   // heading noise of each magnetometer reading
  double gps_error_std = 8.0;    // m, radial RMS of the 2-D position error
  double gps_speed_std = 0.1;    // m/s, receiver speed noise
  std::uint64_t seed = 1;
};

void validate(const NoiseSpec& n);
/// Every noise term zero (same seed).
NoiseSpec noiseless(std::uint64_t seed = 1);

enum class EventType { kWait, kCruise, kAccelTo, kStopAt, kTurnAt, kTurn, kLaneChange };

std::string_view to_string(EventType type);

/// One scripted manoeuvre. Which fields apply depends on `type`:
///   wait        duration
///   cruise      duration, or distance
///   accel_to    speed, accel
///   stop_at     at_m (route distance of the stop line), duration, accel (braking), light, bucket
///   turn_at     at_m (route distance of the turn centre), delta_deg or heading_deg, rate
///   turn        delta_deg or heading_deg, rate
///   lane_change direction (+1 right, -1 left), delta_deg (net), duration, amplitude_deg
struct ScenarioEvent {
  EventType type = EventType::kCruise;
  std::optional<double> duration;
  std::optional<double> distance;
  double speed = 0.0;
  double accel = 2.0;
  double at_m = 0.0;
  double delta_deg = 0.0;
  std::optional<double> heading_deg;
  double rate = 0.3;  // rad/s, peak turn rate
  bool light = true;
  std::string bucket = "offpeak";
  int direction = 1;
  double amplitude_deg = 8.0;
};

struct SlopeSpec {
  double start_m = 0.0;  // route distance
  double end_m = 0.0;
  double amplitude = 0.6;  // m/s^2
  SlopeSignature signature = SlopeSignature::kUpDown;
};

/// Either a time window or a route-distance window.
struct DropoutSpec {
  std::optional<double> t_start;
  std::optional<double> t_end;
  std::optional<double> start_m;
  std::optional<double> end_m;
};

struct ScenarioSpec {
  std::string name = "scenario";
  GeoPoint start{41.8781, -87.6298};
  double initial_heading_deg = 0.0;
  double imu_rate = 100.0;  // Hz
  double gps_rate = 0.5;   // Hz
  std::vector<ScenarioEvent> events;
  std::vector<SlopeSpec> slopes;
  std::vector<DropoutSpec> dropouts;
  QueueProfile queue;
  /// Road vibration while moving; scaled by min(1, speed / 1 m/s).
  double vibration_std = 0.7;        // m/s^2, vertical axis
  double gyro_vibration_std = 0.05;  // rad/s, roll and pitch axes
  double mount_yaw_deg = 0.0;        // phone x axis, clockwise from vehicle forward
  bool operator==(const ScenarioSpec&) const;
};

void validate(const ScenarioSpec& s);

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioSpec& s);
ScenarioSpec load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const ScenarioSpec& s);

struct TruthSample {
  double t = 0.0;
  GeoPoint position;
  Enu enu = Enu::Zero();  // about ScenarioSpec::start
  double heading = 0.0;   // degrees
  double speed = 0.0;
  double distance = 0.0;  // route distance travelled
  // Held over [t, t + 1 / imu_rate).
  double accel = 0.0;     // forward, m/s^2
  double yaw_rate = 0.0;  // rad/s, clockwise positive
  double lateral = 0.0;   // m/s^2, positive right
  double vertical = 0.0;  // m/s^2, positive up
};

/// A landmark event planted by the script.
struct PlantedLandmark {
  std::string id;
  std::string db_kind;  // traffic_light, turn, bridge, tunnel
  PatternKind kind = PatternKind::kStopGo;
  GeoPoint location;
  double t_start = 0.0;
  double t_end = 0.0;
  double t_anchor = 0.0;
  double queue_vehicles = 0.0;  // traffic lights only
};

struct LaneChangeEvent {
  double t_start = 0.0;
  double t_end = 0.0;
  double net_deg = 0.0;
};

struct GroundTruth {
  std::vector<TruthSample> samples;
  std::vector<PlantedLandmark> landmarks;
  std::vector<std::pair<double, double>> stops;    // [stop_begin, resume]
  std::vector<std::pair<double, double>> dropouts;  // time windows
  std::vector<LaneChangeEvent> lane_changes;
  std::vector<std::pair<double, double>> turns;  // [t_start, t_end] of every heading manoeuvre
};

/// Piecewise-kinematic integration at imu_rate. `seed` draws traffic-light
/// queue lengths.
GroundTruth generate_ground_truth(const ScenarioSpec& s, std::uint64_t seed = 1);

std::vector<ImuSample> synthesize_imu(const GroundTruth& truth, const ScenarioSpec& s, const NoiseSpec& n);
std::vector<GpsFix> synthesize_gps(const GroundTruth& truth, const ScenarioSpec& s, const NoiseSpec& n);

/// Database entries with fingerprints taken from the noiseless channels.
std::vector<LandmarkFingerprint> landmark_database(const GroundTruth& truth, const DetectionConfig& cfg = {});

struct Simulation {
  GroundTruth truth;
  Trace trace;
  std::vector<LandmarkFingerprint> db;
};

Simulation simulate(const ScenarioSpec& s, const NoiseSpec& n);

struct EmittedFiles {
  std::filesystem::path trace;
  std::filesystem::path landmarks;
  std::filesystem::path truth;
};

/// Writes trace.jsonl, landmarks.json and truth.csv into `out_dir`.
EmittedFiles emit(const ScenarioSpec& s, const NoiseSpec& n, const std::filesystem::path& out_dir);
EmittedFiles emit(const Simulation& sim, const std::filesystem::path& out_dir);

/// Truth CSV: t,lat,lon,heading_deg,speed_mps,accel_mps2
struct TruthRow {
  double t = 0.0;
  GeoPoint position;
  double heading = 0.0;
  double speed = 0.0;
  double accel = 0.0;
};
void write_truth(std::ostream& out, const GroundTruth& truth);
std::vector<TruthRow> read_truth(std::istream& in);
std::vector<TruthRow> load_truth(const std::filesystem::path& path);
std::vector<TruthRow> truth_rows(const GroundTruth& truth);

}  // namespace drnav

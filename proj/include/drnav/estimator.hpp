#pragma once

#include <cstddef>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drnav/geo.hpp"
#include "drnav/landmarks.hpp"
#include "drnav/motion.hpp"
#include "drnav/orientation.hpp"
#include "drnav/regression.hpp"
#include "drnav/trace.hpp"

namespace drnav {

enum class GpsQuality { kBad, kGood, kTrainableGood };
enum class PoseMode { kGpsGood, kDeadReckoned, kCalibrated };

std::string_view to_string(GpsQuality q);
std::string_view to_string(PoseMode m);
PoseMode pose_mode_from_string(std::string_view s);

struct EstimatedPose {
  double t = 0.0;  // slot end
  GeoPoint position;
  double heading = 0.0;  // degrees, [0, 360)
  double speed = 0.0;    // m/s
  PoseMode mode = PoseMode::kGpsGood;
  double slot_distance = 0.0;  // m
  // Metadata, not written to the pose CSV.
  bool fallback_model = false;    // dead reckoned with untrained kinematics
  bool before_first_fix = false;  // no GPS fix seen yet; position is the first fix
  std::string landmark_id;        // set when Calibrated
};

struct EstimatorConfig {
  double slot_s = 2.0;
  double gps_good_m = 30.0;
  double gps_train_m = 20.0;
  /// Learning distance converted to a slot count at `assumed_speed_mps`.
  double training_distance_m = 3000.0;
  double assumed_speed_mps = 11.11;
  /// Explicit capacity in slots; 0 derives it from the training distance.
  std::size_t buffer_capacity = 0;
  /// Pull of the tracked speed toward the GPS speed in good slots.
  double speed_gps_gain = 0.2;
  bool landmarks_enabled = true;
  MatchConfig match;
  QueueProfile queue;
  std::string queue_bucket = "offpeak";
  std::string queue_profile_path;  // optional JSON file replacing `queue`
  /// 1 snaps fully to the landmark, 0 ignores it.
  double snap_blend = 1.0;
  /// GPS course re-anchoring of the inertial heading. Course samples come
  /// from straight stretches of at least `course_baseline_m` between good
  /// fixes; their mean offset is applied once it exceeds `course_sigmas`
  /// standard errors.
  bool course_anchoring = true;
  double course_baseline_m = 100.0;
  double course_straight_deg = 5.0;
  std::size_t course_window = 50;
  double course_sigmas = 3.0;
  OrientationConfig orientation;
  MotionConfig motion;
  DetectionConfig detection;
  FitOptions fit;
};

void validate(const EstimatorConfig& cfg);
std::size_t effective_buffer_capacity(const EstimatorConfig& cfg);

QueueProfile load_queue_profile(const std::filesystem::path& path);

GpsQuality gate_gps(const std::optional<GpsFix>& fix, const EstimatorConfig& cfg);

/// Everything the slot step consumes, reduced from the raw samples.
struct SlotInput {
  TimeSlot slot;
  double a_mean = 0.0;   // mean forward acceleration of warm samples
  double heading = 0.0;  // circular mean of the smoothed heading
  bool stopped_at_end = false;
  bool fully_stopped = false;
  std::vector<DetectedPattern> patterns;  // anchored inside the slot
};

/// Orientation, motion and detected patterns over a whole trace.
struct TraceAnalysis {
  std::vector<double> t;
  OrientationTrack orientation;
  std::vector<MotionState> motion;
  std::vector<double> accel_forward;
  std::vector<double> accel_lateral;
  std::vector<double> accel_vertical;
  std::vector<DetectedPattern> patterns;  // sorted by anchor time
};

TraceAnalysis analyze_trace(const Trace& trace, const EstimatorConfig& cfg);
std::vector<SlotInput> slot_inputs(const Trace& trace, const TraceAnalysis& analysis, const EstimatorConfig& cfg);

struct EstimatorState {
  explicit EstimatorState(std::size_t capacity) : buffer(capacity) {}

  std::optional<GeoPoint> origin;  // first good fix
  Enu position = Enu::Zero();
  double speed = 0.0;
  bool have_fix = false;
  TrainingBuffer buffer;
  std::optional<ModelPair> models;
  std::optional<GpsFix> prev_fix;  // previous slot's fix when trainable
  std::optional<double> prev_gps_speed;
  /// Consecutive good fixes with their slot headings, for course samples.
  std::deque<std::pair<Enu, double>> course_track;
  std::deque<double> course_offsets;  // GPS course minus inertial heading, degrees
};

/// Heading correction from the course offsets; 0 until significant.
double heading_correction(const EstimatorState& state, const EstimatorConfig& cfg);

/// Advances one slot. `db` may be empty.
EstimatedPose step(EstimatorState& state, const SlotInput& input, std::span<const LandmarkFingerprint> db,
                   const EstimatorConfig& cfg);

std::vector<EstimatedPose> run(const Trace& trace, std::span<const LandmarkFingerprint> db,
                               const EstimatorConfig& cfg);

/// Also exposes the final trained models.
struct RunResult {
  std::vector<EstimatedPose> poses;
  std::optional<ModelPair> models;
};
RunResult run_with_models(const Trace& trace, std::span<const LandmarkFingerprint> db, const EstimatorConfig& cfg);

/// Pose CSV: t,lat,lon,heading_deg,speed_mps,mode,slot_distance_m
void write_poses(std::ostream& out, std::span<const EstimatedPose> poses);
void save_poses(const std::filesystem::path& path, std::span<const EstimatedPose> poses);
std::vector<EstimatedPose> read_poses(std::istream& in);
std::vector<EstimatedPose> load_poses(const std::filesystem::path& path);

}  // namespace drnav

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drnav/geo.hpp"
#include "drnav/motion.hpp"

namespace drnav {

enum class PatternKind { kStopGo, kTurn, kLaneChange, kSlope };

std::string_view to_string(PatternKind kind);

inline constexpr std::size_t kFeatureLength = 16;
using Features = std::array<double, kFeatureLength>;

/// An inertial event observed in the live sensor stream.
struct DetectedPattern {
  PatternKind kind = PatternKind::kStopGo;
  double t_start = 0.0;
  double t_end = 0.0;
  Features features{};
  double heading_delta = 0.0;  // degrees, Turn/LaneChange only
  /// Instant at which the vehicle is at the landmark: stop onset for StopGo,
  /// mid-turn for Turn, crest/trough for Slope.
  double t_anchor = 0.0;
};

/// A stored infrastructure entry. `kind` is the pattern kind it matches;
/// `db_kind` keeps the file label ("traffic_light", "turn", "bridge", "tunnel").
struct LandmarkFingerprint {
  std::string id;
  PatternKind kind = PatternKind::kStopGo;
  std::string db_kind;
  GeoPoint location;
  Features fingerprint{};
};

/// Maps a database label to the pattern kind it is matched against.
PatternKind pattern_kind_for(const std::string& db_kind);

std::vector<LandmarkFingerprint> load_landmark_db(const std::filesystem::path& path);
void save_landmark_db(const std::filesystem::path& path, std::span<const LandmarkFingerprint> db);

struct QueueBucket {
  double mu = 0.0;     // expected vehicles waiting
  double sigma = 0.0;  // std of the waiting count
};

struct QueueProfile {
  std::map<std::string, QueueBucket> buckets{{"offpeak", {2.0, 1.0}}, {"rush", {6.0, 2.0}}};
  double vehicle_length = 5.0;
};

void validate(const QueueProfile& profile);

/// mu_t * L / 2 for the given time-of-day bucket.
double queue_correction(const QueueProfile& profile, const std::string& bucket);

struct DetectionConfig {
  // stop/go
  double accel_smooth_s = 0.5;
  double brake_threshold = 0.3;  // m/s^2
  double brake_s = 1.0;
  double launch_s = 1.0;
  double min_stop_s = 2.0;
  double search_s = 6.0;
  double signature_s = 4.0;
  // turns and lane changes
  double rate_smooth_s = 0.5;
  double rate_threshold = 0.1;  // rad/s
  double turn_angle_min = 45.0;
  double lane_angle_max = 15.0;
  double merge_gap_s = 2.0;
  double min_event_s = 0.3;
  double heading_pad_s = 0.5;
  double lateral_tolerance = 0.5;  // m/s^2
  // slopes
  double slope_smooth_s = 2.0;
  double slope_threshold = 0.3;  // m/s^2
  double slope_min_s = 1.5;
  double slope_pair_gap_s = 4.0;
};

std::vector<DetectedPattern> detect_stop_go(std::span<const double> t, std::span<const double> accel_forward,
                                            std::span<const MotionState> motion,
                                            const DetectionConfig& cfg = {});

std::vector<DetectedPattern> detect_turn(std::span<const double> t, std::span<const double> heading,
                                         std::span<const double> yaw_rate, std::span<const double> accel_lateral,
                                         const DetectionConfig& cfg = {});

std::vector<DetectedPattern> detect_slope(std::span<const double> t, std::span<const double> accel_vertical,
                                          const DetectionConfig& cfg = {});

enum class SlopeSignature { kUpDown, kDownUp };
SlopeSignature slope_signature(const DetectedPattern& p);

// Signature builders shared by the detectors and by fingerprint generation.

/// Braking half and launch half of the smoothed forward acceleration, eight
/// samples each, aligned on the end of braking and start of launch found
/// near `stop_begin` / `resume`.
Features stop_go_features(std::span<const double> t, std::span<const double> accel_forward, double stop_begin,
                          double resume, const DetectionConfig& cfg = {});
/// Smoothed yaw rate over [t_start, t_end] padded by a quarter of its length.
Features turn_features(std::span<const double> t, std::span<const double> yaw_rate, double t_start, double t_end,
                       const DetectionConfig& cfg = {});
/// Low-passed vertical acceleration over the padded event interval.
Features slope_features(std::span<const double> t, std::span<const double> accel_vertical, double t_start,
                        double t_end, const DetectionConfig& cfg = {});

/// Normalised cross-correlation mapped from [-1, 1] to [0, 1]; 0.5 when
/// either vector is constant.
double fingerprint_similarity(const Features& a, const Features& b);
double normalized_cross_correlation(std::span<const double> a, std::span<const double> b);

struct MatchConfig {
  double alpha = 0.5;
  double radius_m = 300.0;
  double d0_m = 100.0;
};

struct LandmarkMatch {
  std::size_t index = 0;
  LandmarkFingerprint landmark;
  double score = 0.0;
  double similarity = 0.0;
  double distance_m = 0.0;
};

/// Best landmark of the pattern's kind within the radius under
/// alpha * M + (1 - alpha) * exp(-D / d0). Ties keep the earlier entry.
std::optional<LandmarkMatch> match_landmark(const DetectedPattern& p, const GeoPoint& x,
                                            std::span<const LandmarkFingerprint> db, const MatchConfig& cfg = {});

// Series helpers.
double median_period(std::span<const double> t);
int samples_for(double seconds, double period);  // odd, >= 1
std::vector<double> centred_moving_average(std::span<const double> values, int window);
/// Linear interpolation at n evenly spaced instants over [t0, t1], clamped at
/// the series ends.
Features resample(std::span<const double> t, std::span<const double> values, double t0, double t1);

}  // namespace drnav

#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "drnav/trace.hpp"

namespace drnav {

inline constexpr double kStandardGravity = 9.80665;

struct OrientationConfig {
  double mag_blend = 0.02;             // k: per-sample pull toward the magnetometer heading
  double gravity_tau_s = 1.0;          // forgetting time constant during warm-up
  double gravity_static_tau_s = 30.0;  // forgetting time constant for static refreshes
  double warmup_s = 1.0;
  double declination_deg = 0.0;
  double mount_yaw_deg = 0.0;          // phone x axis, clockwise from vehicle forward
  double static_var_max = 0.05;        // (m/s^2)^2, variance of |a| below which the phone is still
  double static_accel_tol = 0.1;       // m/s^2, |lowpass(a) - gravity| allowed for a static refresh
  double static_sample_tol = 1.0;      // m/s^2, |a - gravity| allowed for the refreshing sample
  int smooth_window = 25;              // samples, odd
  bool mount_calibration = false;
};

/// Complementary-filter state. Heading is the vehicle heading in degrees
/// clockwise from true north. `gravity_est` is the low-passed specific force
/// at rest, i.e. it points up in the body frame.
struct HeadingState {
  double heading = 0.0;
  Eigen::Vector3d gravity_est = Eigen::Vector3d::Zero();
  double t_last = 0.0;

  bool started = false;
  bool heading_from_mag = true;  // seed heading from the first magnetometer reading
  double warmup_elapsed = 0.0;
  double gravity_samples = 0.0;  // samples absorbed into gravity_est
  Eigen::Vector3d accel_lp = Eigen::Vector3d::Zero();
  double norm_mean = 0.0;
  double norm_var = 0.0;

  /// State whose heading starts at `heading_deg` instead of the magnetometer.
  static HeadingState with_heading(double heading_deg);

  bool warm(const OrientationConfig& cfg) const;
};

HeadingState update_orientation(const HeadingState& state, const ImuSample& sample,
                                const OrientationConfig& cfg = {});

struct EarthAccel {
  double forward = 0.0;
  double lateral = 0.0;   // positive to the right
  double vertical = 0.0;  // positive up, gravity removed
};

/// Throws kWarmupIncomplete before the gravity estimate is usable.
EarthAccel earth_frame_accel(const HeadingState& state, const ImuSample& sample,
                             const OrientationConfig& cfg = {});

/// Angular rate about the down axis in rad/s; positive turns clockwise
/// (heading increasing).
double yaw_rate(const HeadingState& state, const ImuSample& sample);

/// Heading of the phone's x axis from the magnetometer, true north, degrees.
/// Empty when the horizontal field is too weak to resolve.
std::optional<double> magnetic_heading(const Eigen::Vector3d& gravity_up, const Eigen::Vector3d& mag,
                                       double declination_deg);

/// Circular moving average with a centred odd window, truncated at the ends.
std::vector<double> smooth_heading(std::span<const double> series, int window);

/// Estimates the phone-to-vehicle yaw offset from the first sustained
/// straight-line acceleration. Empty if no such event is found.
std::optional<double> calibrate_mount_yaw(std::span<const ImuSample> samples,
                                          const OrientationConfig& cfg = {});

/// Per-sample outputs of running the filter over a whole trace.
struct OrientationTrack {
  std::vector<double> heading;    // filter heading, degrees
  std::vector<double> smoothed;   // smooth_heading(heading)
  std::vector<double> yaw_rate;   // rad/s
  std::vector<EarthAccel> accel;  // zero before warm-up
  std::vector<bool> warm;
};

OrientationTrack track_orientation(std::span<const ImuSample> samples, const OrientationConfig& cfg);

}  // namespace drnav

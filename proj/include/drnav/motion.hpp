#pragma once

#include <span>
#include <vector>

#include "drnav/trace.hpp"

namespace drnav {

enum class MotionState { kMoving, kStopped };

struct MotionWindow {
  double t_start = 0.0;
  double t_end = 0.0;
  double var_accel = 0.0;  // variance of |accel|, (m/s^2)^2
  double var_gyro = 0.0;   // variance of |gyro|, (rad/s)^2
};

struct MotionConfig {
  double accel_threshold = 0.1;
  double gyro_threshold = 0.005;
  double window_s = 1.0;
  double hop_s = 0.5;
};

inline constexpr double kMinMotionWindowS = 0.5;

/// Stopped iff both variances fall below their thresholds.
MotionState classify_motion(const MotionWindow& w, const MotionConfig& cfg = {});

double zero_velocity_update(double speed, MotionState state);

/// Sliding windows of `window_s` every `hop_s` over the samples. A trace
/// shorter than one window yields a single window over all samples (if it
/// spans at least 0.5 s).
std::vector<MotionWindow> motion_windows(std::span<const ImuSample> samples, const MotionConfig& cfg = {});

/// Motion state for every sample, taken from the window whose centre is
/// nearest the sample time.
std::vector<MotionState> sample_motion(std::span<const ImuSample> samples, std::span<const MotionWindow> windows,
                                       const MotionConfig& cfg = {});

}  // namespace drnav

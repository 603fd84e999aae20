#include "drnav/orientation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <fmt/format.h>

#include "drnav/error.hpp"

namespace drnav {

namespace {

constexpr double kShortTauS = 0.5;
constexpr double kMinGravity = 8.5;
constexpr double kMaxGravity = 11.0;

struct HorizontalAxes {
  Eigen::Vector3d forward;
  Eigen::Vector3d right;
  Eigen::Vector3d down;
};

// Phone x/y axes projected onto the plane normal to gravity.
HorizontalAxes horizontal_axes(const Eigen::Vector3d& gravity_up) {
  const Eigen::Vector3d down = -gravity_up.normalized();
  Eigen::Vector3d f = Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitX().dot(down) * down;
  if (f.norm() < 1e-6) {
    // Phone x axis vertical; fall back to the y axis for a reference direction.
    const Eigen::Vector3d r0 = Eigen::Vector3d::UnitY() - Eigen::Vector3d::UnitY().dot(down) * down;
    const Eigen::Vector3d r = r0.normalized();
    return {r.cross(down), r, down};
  }
  f.normalize();
  return {f, down.cross(f), down};
}

double lowpass_alpha(double dt, double tau) { return dt / (tau + dt); }

}  // namespace

HeadingState HeadingState::with_heading(double heading_deg) {
  HeadingState s;
  s.heading = wrap_deg(heading_deg);
  s.heading_from_mag = false;
  return s;
}

bool HeadingState::warm(const OrientationConfig& cfg) const {
  const double g = gravity_est.norm();
  return started && warmup_elapsed >= cfg.warmup_s && g >= kMinGravity && g <= kMaxGravity;
}

std::optional<double> magnetic_heading(const Eigen::Vector3d& gravity_up, const Eigen::Vector3d& mag,
                                       double declination_deg) {
  if (gravity_up.norm() < 1e-9) return std::nullopt;
  const auto axes = horizontal_axes(gravity_up);
  const double mx = mag.dot(axes.forward);
  const double my = mag.dot(axes.right);
  if (std::hypot(mx, my) < 1e-6) return std::nullopt;
  return wrap_deg(std::atan2(-my, mx) * kRadToDeg + declination_deg);
}

HeadingState update_orientation(const HeadingState& state, const ImuSample& sample, const OrientationConfig& cfg) {
  HeadingState next = state;
  const Eigen::Vector3d& a = sample.accel_body;

  if (!state.started) {
    next.started = true;
    next.t_last = sample.t;
    next.gravity_est = a;
    next.gravity_samples = 1.0;
    next.accel_lp = a;
    next.norm_mean = a.norm();
    next.norm_var = 0.0;
    if (state.heading_from_mag) {
      if (auto h = magnetic_heading(a, sample.mag_body, cfg.declination_deg)) {
        next.heading = wrap_deg(*h - cfg.mount_yaw_deg);
      }
    }
    return next;
  }

  const double dt = sample.t - state.t_last;
  if (!(dt > 0.0)) {
    throw Error(ErrorCode::kNonMonotonicTime,
                fmt::format("sample time {} does not follow previous {}", sample.t, state.t_last));
  }
  next.t_last = sample.t;

  // Gyro propagation about the current gravity axis, then magnetometer blend.
  const Eigen::Vector3d down = -state.gravity_est.normalized();
  const double rate = sample.gyro_body.dot(down);
  double heading = state.heading + rate * dt * kRadToDeg;
  if (cfg.mag_blend > 0.0) {
    if (auto h = magnetic_heading(state.gravity_est, sample.mag_body, cfg.declination_deg)) {
      const double vehicle = *h - cfg.mount_yaw_deg;
      heading += cfg.mag_blend * angle_diff_deg(vehicle, heading);
    }
  }
  next.heading = wrap_deg(heading);

  // Short-horizon statistics used to recognise a still phone.
  const double short_alpha = lowpass_alpha(dt, kShortTauS);
  next.accel_lp = state.accel_lp + short_alpha * (a - state.accel_lp);
  const double n = a.norm();
  next.norm_mean = state.norm_mean + short_alpha * (n - state.norm_mean);
  const double dev = n - next.norm_mean;
  next.norm_var = state.norm_var + short_alpha * (dev * dev - state.norm_var);

  // Gravity is a growing-memory mean: plain average until the sample count
  // reaches the time constant, exponential forgetting after that.
  auto absorb = [&](double tau) {
    next.gravity_samples = state.gravity_samples + 1.0;
    const double alpha = std::max(lowpass_alpha(dt, tau), 1.0 / next.gravity_samples);
    next.gravity_est = state.gravity_est + alpha * (a - state.gravity_est);
  };
  if (state.warmup_elapsed < cfg.warmup_s) {
    absorb(cfg.gravity_tau_s);
    next.warmup_elapsed = state.warmup_elapsed + dt;
  } else {
    // After warm-up gravity only follows the accelerometer while the phone is
    // still; sustained vehicle acceleration would otherwise tilt the estimate.
    const bool still = next.norm_var < cfg.static_var_max &&
                       (next.accel_lp - state.gravity_est).norm() < cfg.static_accel_tol &&
                       (a - state.gravity_est).norm() < cfg.static_sample_tol;
    if (still) absorb(cfg.gravity_static_tau_s);
  }
  return next;
}

EarthAccel earth_frame_accel(const HeadingState& state, const ImuSample& sample, const OrientationConfig& cfg) {
  if (!state.warm(cfg)) throw Error(ErrorCode::kWarmupIncomplete, "gravity estimate not yet settled");
  const double g = state.gravity_est.norm();
  const Eigen::Vector3d up = state.gravity_est / g;
  const Eigen::Vector3d& a = sample.accel_body;
  const auto axes = horizontal_axes(state.gravity_est);

  const double px = a.dot(axes.forward);
  const double py = a.dot(axes.right);
  const double phi = cfg.mount_yaw_deg * kDegToRad;
  EarthAccel out;
  out.forward = px * std::cos(phi) - py * std::sin(phi);
  out.lateral = px * std::sin(phi) + py * std::cos(phi);
  out.vertical = a.dot(up) - g;
  return out;
}

double yaw_rate(const HeadingState& state, const ImuSample& sample) {
  if (state.gravity_est.norm() < 1e-9) return sample.gyro_body.z();
  return sample.gyro_body.dot(-state.gravity_est.normalized());
}

std::vector<double> smooth_heading(std::span<const double> series, int window) {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorCode::kInvalidWindow, fmt::format("window must be odd and >= 1, got {}", window));
  }
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> sin_prefix(series.size() + 1, 0.0);
  std::vector<double> cos_prefix(series.size() + 1, 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    sin_prefix[i + 1] = sin_prefix[i] + std::sin(series[i] * kDegToRad);
    cos_prefix[i + 1] = cos_prefix[i] + std::cos(series[i] * kDegToRad);
  }
  std::vector<double> out(series.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (window == 1) {
      out[i] = series[i];
      continue;
    }
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min(n, i + half + 1);
    out[i] = wrap_deg(std::atan2(sin_prefix[hi] - sin_prefix[lo], cos_prefix[hi] - cos_prefix[lo]) * kRadToDeg);
  }
  return out;
}

std::optional<double> calibrate_mount_yaw(std::span<const ImuSample> samples, const OrientationConfig& cfg) {
  constexpr double kMinHorizontal = 0.5;  // m/s^2
  constexpr double kMaxYawRate = 0.05;    // rad/s
  constexpr double kMinEventS = 1.0;

  OrientationConfig probe = cfg;
  probe.mount_yaw_deg = 0.0;
  HeadingState state;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  double event_s = 0.0;
  for (const auto& s : samples) {
    const double prev_t = state.t_last;
    const bool was_started = state.started;
    state = update_orientation(state, s, probe);
    if (!state.warm(probe)) continue;
    const auto a = earth_frame_accel(state, s, probe);
    const double dt = was_started ? s.t - prev_t : 0.0;
    const bool candidate = std::hypot(a.forward, a.lateral) > kMinHorizontal &&
                           std::abs(yaw_rate(state, s)) < kMaxYawRate;
    if (candidate) {
      sum += Eigen::Vector2d(a.forward, a.lateral) * dt;
      event_s += dt;
    } else if (event_s >= kMinEventS) {
      break;
    } else {
      sum.setZero();
      event_s = 0.0;
    }
  }
  if (event_s < kMinEventS) return std::nullopt;
  // The first event is a launch from rest, so the mean horizontal
  // acceleration points along vehicle forward.
  return wrap_deg(-std::atan2(sum.y(), sum.x()) * kRadToDeg);
}

OrientationTrack track_orientation(std::span<const ImuSample> samples, const OrientationConfig& cfg) {
  OrientationTrack track;
  track.heading.reserve(samples.size());
  track.yaw_rate.reserve(samples.size());
  track.accel.reserve(samples.size());
  track.warm.reserve(samples.size());
  HeadingState state;
  for (const auto& s : samples) {
    state = update_orientation(state, s, cfg);
    track.heading.push_back(state.heading);
    track.yaw_rate.push_back(yaw_rate(state, s));
    const bool warm = state.warm(cfg);
    track.warm.push_back(warm);
    track.accel.push_back(warm ? earth_frame_accel(state, s, cfg) : EarthAccel{});
  }
  track.smoothed = smooth_heading(track.heading, cfg.smooth_window);
  return track;
}

}  // namespace drnav

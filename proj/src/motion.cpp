#include "drnav/motion.hpp"

#include <algorithm>
#include <cmath>

#include "drnav/error.hpp"

namespace drnav {

MotionState classify_motion(const MotionWindow& w, const MotionConfig& cfg) {
  return (w.var_accel < cfg.accel_threshold && w.var_gyro < cfg.gyro_threshold) ? MotionState::kStopped
                                                                                : MotionState::kMoving;
}

double zero_velocity_update(double speed, MotionState state) {
  return state == MotionState::kStopped ? 0.0 : speed;
}

namespace {

MotionWindow summarise(std::span<const ImuSample> samples, std::size_t begin, std::size_t end, double t_start,
                       double t_end) {
  double ma = 0.0;
  double mg = 0.0;
  const auto n = static_cast<double>(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    ma += samples[i].accel_body.norm();
    mg += samples[i].gyro_body.norm();
  }
  ma /= n;
  mg /= n;
  double va = 0.0;
  double vg = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const double da = samples[i].accel_body.norm() - ma;
    const double dg = samples[i].gyro_body.norm() - mg;
    va += da * da;
    vg += dg * dg;
  }
  return {t_start, t_end, va / n, vg / n};
}

}  // namespace

std::vector<MotionWindow> motion_windows(std::span<const ImuSample> samples, const MotionConfig& cfg) {
  if (cfg.window_s < kMinMotionWindowS || !(cfg.hop_s > 0.0)) {
    throw Error(ErrorCode::kInvalidWindow, "motion window must be >= 0.5 s with a positive hop");
  }
  std::vector<MotionWindow> out;
  if (samples.empty()) return out;
  const double t0 = samples.front().t;
  const double t_last = samples.back().t;
  const double eps = 1e-9;

  if (t_last - t0 < cfg.window_s) {
    if (t_last - t0 >= kMinMotionWindowS) out.push_back(summarise(samples, 0, samples.size(), t0, t_last));
    return out;
  }

  std::size_t begin = 0;
  std::size_t end = 0;
  for (std::size_t k = 0;; ++k) {
    const double ws = t0 + static_cast<double>(k) * cfg.hop_s;
    const double we = ws + cfg.window_s;
    if (we > t_last + eps + (samples.size() > 1 ? samples[1].t - samples[0].t : 0.0)) break;
    while (begin < samples.size() && samples[begin].t < ws - eps) ++begin;
    end = std::max(end, begin);
    while (end < samples.size() && samples[end].t < we - eps) ++end;
    if (end > begin) out.push_back(summarise(samples, begin, end, ws, we));
  }
  return out;
}

std::vector<MotionState> sample_motion(std::span<const ImuSample> samples, std::span<const MotionWindow> windows,
                                       const MotionConfig& cfg) {
  std::vector<MotionState> out(samples.size(), MotionState::kMoving);
  if (windows.empty()) return out;
  std::size_t w = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = samples[i].t;
    auto centre = [&](std::size_t k) { return 0.5 * (windows[k].t_start + windows[k].t_end); };
    while (w + 1 < windows.size() && std::abs(centre(w + 1) - t) <= std::abs(centre(w) - t)) ++w;
    out[i] = classify_motion(windows[w], cfg);
  }
  return out;
}

}  // namespace drnav

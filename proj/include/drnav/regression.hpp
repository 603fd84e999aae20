#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace drnav {

/// One good-GPS timeslot reduced to the regression variables.
struct SlotObservation {
  double v_prev = 0.0;  // m/s, speed at slot start
  double a_mean = 0.0;  // m/s^2, mean forward acceleration over the slot
  double dt = 0.0;      // s
  double g_dist = 0.0;  // m, GPS distance along the direction of travel
  double v_end = 0.0;   // m/s, speed at slot end

  bool operator==(const SlotObservation&) const = default;
};

/// dt > 0, speeds >= 0, every field finite. `g_dist` may be slightly negative:
/// it is a projection of two noisy fixes.
void validate(const SlotObservation& obs);

/// Fixed-capacity FIFO of the most recent observations.
class TrainingBuffer {
 public:
  explicit TrainingBuffer(std::size_t capacity);

  void push(const SlotObservation& obs);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return observations_.size(); }
  bool empty() const { return observations_.empty(); }
  const std::deque<SlotObservation>& observations() const { return observations_; }
  std::vector<SlotObservation> snapshot() const { return {observations_.begin(), observations_.end()}; }

 private:
  std::size_t capacity_;
  std::deque<SlotObservation> observations_;
};

TrainingBuffer push_observation(TrainingBuffer buf, const SlotObservation& obs);

/// V_i = V_{i-1} + beta * a_i * dt + mu
struct VelocityModel {
  double beta = 1.0;
  double mu = 0.0;
  double residual_std = 0.0;
};

/// G = l1 * V_{i-1} * dt + l2 * a_i * dt^2 / 2 + l3 * dt^2 + l4 * dt + eta
struct DistanceModel {
  std::array<double, 4> lambda{1.0, 1.0, 0.0, 0.0};
  double eta = 0.0;
  double residual_std = 0.0;
  /// Columns dropped as linearly dependent (e.g. "lambda3" and "lambda4"
  /// under a constant dt); their contribution is carried by eta.
  std::vector<std::string> folded_columns;
  bool ridge = false;
};

struct FitOptions {
  std::size_t min_obs = 10;
  double min_regressor_variance = 1e-6;
  double rank_tolerance = 1e-10;
  double max_condition = 1e10;
  double ridge_penalty = 1e-8;
};

VelocityModel fit_velocity(std::span<const SlotObservation> obs, const FitOptions& opts = {});
VelocityModel fit_velocity(const TrainingBuffer& buf, const FitOptions& opts = {});
DistanceModel fit_distance(std::span<const SlotObservation> obs, const FitOptions& opts = {});
DistanceModel fit_distance(const TrainingBuffer& buf, const FitOptions& opts = {});

/// Both predictions are clamped at zero.
double predict_velocity(const VelocityModel& m, double v_prev, double a_mean, double dt);
double predict_distance(const DistanceModel& m, double v_prev, double a_mean, double dt);

/// Plain kinematics (beta = 1, lambda1 = lambda2 = 1, everything else 0).
VelocityModel kinematic_velocity_model();
DistanceModel kinematic_distance_model();

struct ModelPair {
  VelocityModel velocity;
  DistanceModel distance;
};

nlohmann::json to_json(const ModelPair& models);
ModelPair models_from_json(const nlohmann::json& j);
void save_models(const std::filesystem::path& path, const ModelPair& models);
ModelPair load_models(const std::filesystem::path& path);

}  // namespace drnav

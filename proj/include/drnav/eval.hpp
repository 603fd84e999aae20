#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drnav/estimator.hpp"
#include "drnav/simulator.hpp"

namespace drnav {

/// Geodesic error of each pose against the truth row nearest in time. Throws
/// kAlignment when no truth row lies within slot_s / 2.
std::vector<double> per_slot_error(std::span<const EstimatedPose> est, std::span<const TruthRow> truth, double slot_s);

struct CdfPoint {
  double error = 0.0;
  double fraction = 0.0;
};

/// Empirical CDF at each distinct error value. Throws kInsufficientData on
/// empty input.
std::vector<CdfPoint> error_cdf(std::span<const double> errors);

struct BadSegment {
  std::size_t start_index = 0;
  std::size_t slot_count = 0;
  double length_m = 0.0;
};

/// Maximal runs of consecutive slots with error >= threshold.
std::vector<BadSegment> bad_segment_stats(std::span<const double> errors, std::span<const double> slot_distances,
                                          double threshold = 30.0);

/// Variance of cumulative error against step count, fitted by a line
/// through the origin.
struct GrowthFit {
  std::vector<double> variance;  // variance[k] is for t = k + 1
  double slope = 0.0;
  double r2 = 0.0;
};

/// `runs[r][k]` is the error of run r at step k; all runs need the same
/// length and there must be at least two.
GrowthFit error_growth(const std::vector<std::vector<double>>& runs);

struct EvalConfig {
  double slot_s = 2.0;
  double bad_threshold_m = 30.0;
  double good_error_m = 20.0;  // reported fraction of dead-reckoned slots within this error
};

struct EvalReport {
  std::vector<double> per_slot_errors;
  std::vector<double> truth_slot_distances;
  double mean_slot_error = 0.0;
  std::vector<CdfPoint> cdf;
  std::vector<BadSegment> bad_segments;
  // Distance over the dead-reckoned slots (all slots when there are none).
  bool distance_over_dead_reckoned = false;
  double estimated_distance_m = 0.0;
  double truth_distance_m = 0.0;
  double overall_distance_error_m = 0.0;
  double overall_distance_error_pct = 0.0;
  std::size_t dead_reckoned_slots = 0;
  double dead_reckoned_mean_error = 0.0;
  double dead_reckoned_within_fraction = 0.0;
  /// Error at the final slot of each run of non-GPS slots.
  std::vector<double> dropout_end_errors;
};

EvalReport evaluate(std::span<const EstimatedPose> est, std::span<const TruthRow> truth, const EvalConfig& cfg = {});

nlohmann::json summary_json(const EvalReport& r);

/// per_slot.csv, cdf.csv, segments.csv and summary.json.
void write_report(const std::filesystem::path& out_dir, const EvalReport& r, std::span<const EstimatedPose> est);

}  // namespace drnav

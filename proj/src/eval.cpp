#include "drnav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "drnav/error.hpp"

namespace drnav {

namespace {

std::size_t nearest_truth(std::span<const TruthRow> truth, double t) {
  const auto it = std::lower_bound(truth.begin(), truth.end(), t,
                                   [](const TruthRow& r, double v) { return r.t < v; });
  std::size_t i = static_cast<std::size_t>(it - truth.begin());
  if (i == truth.size()) return truth.size() - 1;
  if (i > 0 && t - truth[i - 1].t <= truth[i].t - t) --i;
  return i;
}

// Arc length along the truth polyline, interpolated in time.
class ArcLength {
 public:
  explicit ArcLength(std::span<const TruthRow> truth) : truth_(truth), cum_(truth.size(), 0.0) {
    for (std::size_t i = 1; i < truth.size(); ++i) {
      cum_[i] = cum_[i - 1] + geodesic_distance(truth[i - 1].position, truth[i].position);
    }
  }
  double at(double t) const {
    if (t <= truth_.front().t) return 0.0;
    if (t >= truth_.back().t) return cum_.back();
    const auto it = std::upper_bound(truth_.begin(), truth_.end(), t,
                                     [](double v, const TruthRow& r) { return v < r.t; });
    const auto hi = static_cast<std::size_t>(it - truth_.begin());
    const auto lo = hi - 1;
    const double w = (t - truth_[lo].t) / (truth_[hi].t - truth_[lo].t);
    return cum_[lo] + w * (cum_[hi] - cum_[lo]);
  }

 private:
  std::span<const TruthRow> truth_;
  std::vector<double> cum_;
};

}  // namespace

std::vector<double> per_slot_error(std::span<const EstimatedPose> est, std::span<const TruthRow> truth, double slot_s) {
  if (truth.empty()) throw Error(ErrorCode::kAlignment, "truth series is empty");
  std::vector<double> out;
  out.reserve(est.size());
  for (std::size_t k = 0; k < est.size(); ++k) {
    const auto i = nearest_truth(truth, est[k].t);
    if (std::abs(truth[i].t - est[k].t) > slot_s / 2.0) {
      throw Error(ErrorCode::kAlignment, fmt::format("no truth within {} s of pose {} (t={})", slot_s / 2.0, k, est[k].t));
    }
    out.push_back(geodesic_distance(est[k].position, truth[i].position));
  }
  return out;
}

std::vector<CdfPoint> error_cdf(std::span<const double> errors) {
  if (errors.empty()) throw Error(ErrorCode::kInsufficientData, "error CDF of an empty series");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<CdfPoint> cdf;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    cdf.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }
  return cdf;
}

std::vector<BadSegment> bad_segment_stats(std::span<const double> errors, std::span<const double> slot_distances,
                                          double threshold) {
  if (errors.size() != slot_distances.size()) {
    throw Error(ErrorCode::kAlignment, "error and distance series differ in length");
  }
  if (!(threshold > 0.0)) throw Error(ErrorCode::kInvalidValue, "bad-segment threshold must be positive");
  std::vector<BadSegment> out;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i] < threshold) continue;
    if (!out.empty() && out.back().start_index + out.back().slot_count == i) {
      out.back().slot_count += 1;
      out.back().length_m += slot_distances[i];
    } else {
      out.push_back({i, 1, slot_distances[i]});
    }
  }
  return out;
}

GrowthFit error_growth(const std::vector<std::vector<double>>& runs) {
  if (runs.size() < 2) throw Error(ErrorCode::kInsufficientData, "error growth needs at least two runs");
  const std::size_t steps = runs.front().size();
  if (steps == 0) throw Error(ErrorCode::kInsufficientData, "error growth runs are empty");
  for (const auto& r : runs) {
    if (r.size() != steps) throw Error(ErrorCode::kAlignment, "error growth runs differ in length");
  }
  const double m = static_cast<double>(runs.size());
  std::vector<double> cum(runs.size(), 0.0);
  GrowthFit fit;
  fit.variance.resize(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    double mean = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      cum[r] += runs[r][k];
      mean += cum[r];
    }
    mean /= m;
    double ss = 0.0;
    for (double c : cum) ss += (c - mean) * (c - mean);
    fit.variance[k] = ss / (m - 1.0);
  }
  double stt = 0.0;
  double stv = 0.0;
  double vmean = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k + 1);
    stt += t * t;
    stv += t * fit.variance[k];
    vmean += fit.variance[k];
  }
  vmean /= static_cast<double>(steps);
  fit.slope = stv / stt;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k + 1);
    ss_res += std::pow(fit.variance[k] - fit.slope * t, 2);
    ss_tot += std::pow(fit.variance[k] - vmean, 2);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  return fit;
}

EvalReport evaluate(std::span<const EstimatedPose> est, std::span<const TruthRow> truth, const EvalConfig& cfg) {
  if (est.empty()) throw Error(ErrorCode::kInsufficientData, "no poses to evaluate");
  EvalReport r;
  r.per_slot_errors = per_slot_error(est, truth, cfg.slot_s);
  r.mean_slot_error = std::accumulate(r.per_slot_errors.begin(), r.per_slot_errors.end(), 0.0) /
                      static_cast<double>(r.per_slot_errors.size());
  r.cdf = error_cdf(r.per_slot_errors);

  const ArcLength arc(truth);
  r.truth_slot_distances.resize(est.size());
  for (std::size_t k = 0; k < est.size(); ++k) {
    const double t0 = k == 0 ? est[k].t - cfg.slot_s : est[k - 1].t;
    r.truth_slot_distances[k] = arc.at(est[k].t) - arc.at(t0);
  }
  r.bad_segments = bad_segment_stats(r.per_slot_errors, r.truth_slot_distances, cfg.bad_threshold_m);

  auto dead_reckoned = [&](std::size_t k) { return est[k].mode != PoseMode::kGpsGood; };
  std::size_t within = 0;
  double dr_sum = 0.0;
  for (std::size_t k = 0; k < est.size(); ++k) {
    if (!dead_reckoned(k)) continue;
    ++r.dead_reckoned_slots;
    dr_sum += r.per_slot_errors[k];
    if (r.per_slot_errors[k] <= cfg.good_error_m) ++within;
    if (k + 1 == est.size() || !dead_reckoned(k + 1)) r.dropout_end_errors.push_back(r.per_slot_errors[k]);
  }
  if (r.dead_reckoned_slots > 0) {
    r.dead_reckoned_mean_error = dr_sum / static_cast<double>(r.dead_reckoned_slots);
    r.dead_reckoned_within_fraction = static_cast<double>(within) / static_cast<double>(r.dead_reckoned_slots);
  }

  r.distance_over_dead_reckoned = r.dead_reckoned_slots > 0;
  for (std::size_t k = 0; k < est.size(); ++k) {
    if (r.distance_over_dead_reckoned && !dead_reckoned(k)) continue;
    r.estimated_distance_m += est[k].slot_distance;
    r.truth_distance_m += r.truth_slot_distances[k];
  }
  r.overall_distance_error_m = std::abs(r.estimated_distance_m - r.truth_distance_m);
  r.overall_distance_error_pct = r.truth_distance_m > 0.0 ? 100.0 * r.overall_distance_error_m / r.truth_distance_m : 0.0;
  return r;
}

nlohmann::json summary_json(const EvalReport& r) {
  auto quantile = [&](double q) {
    for (const auto& p : r.cdf) {
      if (p.fraction >= q) return p.error;
    }
    return r.cdf.back().error;
  };
  double bad_total = 0.0;
  for (const auto& s : r.bad_segments) bad_total += s.length_m;
  nlohmann::json j;
  j["slots"] = r.per_slot_errors.size();
  j["mean_slot_error_m"] = r.mean_slot_error;
  j["median_slot_error_m"] = quantile(0.5);
  j["p90_slot_error_m"] = quantile(0.9);
  j["max_slot_error_m"] = r.cdf.back().error;
  j["dead_reckoned_slots"] = r.dead_reckoned_slots;
  j["dead_reckoned_mean_error_m"] = r.dead_reckoned_mean_error;
  j["dead_reckoned_within_20m_fraction"] = r.dead_reckoned_within_fraction;
  j["dropout_end_errors_m"] = r.dropout_end_errors;
  j["distance_scope"] = r.distance_over_dead_reckoned ? "dead_reckoned" : "all";
  j["estimated_distance_m"] = r.estimated_distance_m;
  j["truth_distance_m"] = r.truth_distance_m;
  j["overall_distance_error_m"] = r.overall_distance_error_m;
  j["overall_distance_error_pct"] = r.overall_distance_error_pct;
  j["bad_segment_count"] = r.bad_segments.size();
  j["bad_segment_total_m"] = bad_total;
  return j;
}

void write_report(const std::filesystem::path& out_dir, const EvalReport& r, std::span<const EstimatedPose> est) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
  auto open = [&](const char* name) {
    std::ofstream out(out_dir / name);
    if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", (out_dir / name).string()));
    return out;
  };
  {
    auto out = open("per_slot.csv");
    out << "index,t,error_m,mode,slot_distance_m,truth_distance_m\n";
    for (std::size_t k = 0; k < r.per_slot_errors.size(); ++k) {
      out << fmt::format("{},{},{},{},{},{}\n", k, est[k].t, r.per_slot_errors[k], to_string(est[k].mode),
                         est[k].slot_distance, r.truth_slot_distances[k]);
    }
  }
  {
    auto out = open("cdf.csv");
    out << "error_m,fraction\n";
    for (const auto& p : r.cdf) out << fmt::format("{},{}\n", p.error, p.fraction);
  }
  {
    auto out = open("segments.csv");
    out << "start_index,slot_count,length_m\n";
    for (const auto& s : r.bad_segments) out << fmt::format("{},{},{}\n", s.start_index, s.slot_count, s.length_m);
  }
  {
    auto out = open("summary.json");
    out << summary_json(r).dump(2) << '\n';
  }
}

}  // namespace drnav

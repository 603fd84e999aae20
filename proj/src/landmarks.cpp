#include "drnav/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "drnav/error.hpp"

namespace drnav {

std::string_view to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::kStopGo: return "stop_go";
    case PatternKind::kTurn: return "turn";
    case PatternKind::kLaneChange: return "lane_change";
    case PatternKind::kSlope: return "slope";
  }
  return "unknown";
}

PatternKind pattern_kind_for(const std::string& db_kind) {
  if (db_kind == "traffic_light") return PatternKind::kStopGo;
  if (db_kind == "turn") return PatternKind::kTurn;
  if (db_kind == "bridge" || db_kind == "tunnel") return PatternKind::kSlope;
  throw Error(ErrorCode::kParse, fmt::format("unknown landmark kind \"{}\"", db_kind));
}

// ---------------------------------------------------------------------------
// Series helpers

double median_period(std::span<const double> t) {
  if (t.size() < 2) return 1.0;
  std::vector<double> d(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) d[i - 1] = t[i] - t[i - 1];
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

int samples_for(double seconds, double period) {
  int n = std::max(1, static_cast<int>(std::lround(seconds / period)));
  if (n % 2 == 0) ++n;
  return n;
}

std::vector<double> centred_moving_average(std::span<const double> values, int window) {
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> prefix(values.size() + 1, 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + values[i];
  std::vector<double> out(values.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min(n, i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

namespace {

double interpolate(std::span<const double> t, std::span<const double> v, double at) {
  if (at <= t.front()) return v.front();
  if (at >= t.back()) return v.back();
  const auto it = std::upper_bound(t.begin(), t.end(), at);
  const auto hi = static_cast<std::size_t>(it - t.begin());
  const auto lo = hi - 1;
  const double w = (at - t[lo]) / (t[hi] - t[lo]);
  return v[lo] + w * (v[hi] - v[lo]);
}

std::size_t index_at(std::span<const double> t, double at) {
  const auto it = std::lower_bound(t.begin(), t.end(), at);
  if (it == t.end()) return t.size() - 1;
  return static_cast<std::size_t>(it - t.begin());
}

struct Run {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
};

template <typename Pred>
std::vector<Run> runs_where(std::size_t n, Pred pred) {
  std::vector<Run> out;
  std::size_t i = 0;
  while (i < n) {
    if (!pred(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && pred(j + 1)) ++j;
    out.push_back({i, j});
    i = j + 1;
  }
  return out;
}

void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(ErrorCode::kInvalidValue, fmt::format("{} series are not time-aligned", what));
}

}  // namespace

Features resample(std::span<const double> t, std::span<const double> values, double t0, double t1) {
  Features f{};
  if (t.empty()) return f;
  for (std::size_t k = 0; k < kFeatureLength; ++k) {
    const double at = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(kFeatureLength - 1);
    f[k] = interpolate(t, values, at);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Signatures

namespace {

struct StopAnchors {
  double brake_end;
  double launch_start;
};

StopAnchors stop_anchors(std::span<const double> t, std::span<const double> smooth, double stop_begin,
                         double resume, const DetectionConfig& cfg) {
  StopAnchors a{stop_begin, resume};
  const std::size_t lo = index_at(t, stop_begin - cfg.search_s);
  const std::size_t hi = index_at(t, stop_begin + 1.0);
  for (std::size_t i = hi + 1; i-- > lo;) {
    if (smooth[i] <= -cfg.brake_threshold) {
      a.brake_end = t[i];
      break;
    }
  }
  const std::size_t lo2 = index_at(t, resume - 1.0);
  const std::size_t hi2 = index_at(t, resume + cfg.search_s);
  for (std::size_t i = lo2; i <= hi2; ++i) {
    if (smooth[i] >= cfg.brake_threshold) {
      a.launch_start = t[i];
      break;
    }
  }
  return a;
}

Features stop_go_from_smoothed(std::span<const double> t, std::span<const double> smooth, double stop_begin,
                               double resume, const DetectionConfig& cfg) {
  const auto anchors = stop_anchors(t, smooth, stop_begin, resume, cfg);
  // Two halves of eight samples each.
  constexpr std::size_t kHalf = kFeatureLength / 2;
  Features f{};
  for (std::size_t k = 0; k < kHalf; ++k) {
    const double u = static_cast<double>(k) / static_cast<double>(kHalf - 1);
    f[k] = interpolate(t, smooth, anchors.brake_end - cfg.signature_s * (1.0 - u));
    f[kHalf + k] = interpolate(t, smooth, anchors.launch_start + cfg.signature_s * u);
  }
  return f;
}

std::pair<double, double> padded(double t_start, double t_end) {
  const double pad = 0.25 * (t_end - t_start);
  return {t_start - pad, t_end + pad};
}

}  // namespace

Features stop_go_features(std::span<const double> t, std::span<const double> accel_forward, double stop_begin,
                          double resume, const DetectionConfig& cfg) {
  require_aligned(t.size(), accel_forward.size(), "stop/go");
  if (t.empty()) return {};
  const auto smooth = centred_moving_average(accel_forward, samples_for(cfg.accel_smooth_s, median_period(t)));
  return stop_go_from_smoothed(t, smooth, stop_begin, resume, cfg);
}

Features turn_features(std::span<const double> t, std::span<const double> yaw_rate, double t_start, double t_end,
                       const DetectionConfig& cfg) {
  require_aligned(t.size(), yaw_rate.size(), "turn");
  if (t.empty()) return {};
  const auto smooth = centred_moving_average(yaw_rate, samples_for(cfg.rate_smooth_s, median_period(t)));
  const auto [a, b] = padded(t_start, t_end);
  return resample(t, smooth, a, b);
}

Features slope_features(std::span<const double> t, std::span<const double> accel_vertical, double t_start,
                        double t_end, const DetectionConfig& cfg) {
  require_aligned(t.size(), accel_vertical.size(), "slope");
  if (t.empty()) return {};
  const auto lp = centred_moving_average(accel_vertical, samples_for(cfg.slope_smooth_s, median_period(t)));
  const auto [a, b] = padded(t_start, t_end);
  return resample(t, lp, a, b);
}

// ---------------------------------------------------------------------------
// Detectors

std::vector<DetectedPattern> detect_stop_go(std::span<const double> t, std::span<const double> accel_forward,
                                            std::span<const MotionState> motion, const DetectionConfig& cfg) {
  require_aligned(t.size(), accel_forward.size(), "stop/go");
  require_aligned(t.size(), motion.size(), "stop/go");
  std::vector<DetectedPattern> out;
  if (t.size() < 2) return out;
  const double period = median_period(t);
  const auto smooth = centred_moving_average(accel_forward, samples_for(cfg.accel_smooth_s, period));

  auto stops = runs_where(t.size(), [&](std::size_t i) { return motion[i] == MotionState::kStopped; });
  // Bridge sub-second Moving blips inside one stop.
  std::vector<Run> merged;
  for (const auto& r : stops) {
    if (!merged.empty() && t[r.first] - t[merged.back().last] <= 1.0) {
      merged.back().last = r.last;
    } else {
      merged.push_back(r);
    }
  }

  auto phase_time = [&](double from, double to, auto pred) {
    double total = 0.0;
    std::optional<double> first;
    for (std::size_t i = index_at(t, from); i < t.size() && t[i] <= to; ++i) {
      if (pred(smooth[i])) {
        total += period;
        if (!first) first = t[i];
      }
    }
    return std::pair{total, first};
  };

  for (const auto& r : merged) {
    if (r.last + 1 >= t.size()) continue;  // never resumed
    const double stop_begin = t[r.first];
    const double resume = t[r.last + 1];
    if (resume - stop_begin < cfg.min_stop_s) continue;

    const auto [brake_time, brake_first] = phase_time(stop_begin - cfg.search_s, stop_begin + 1.0,
                                                      [&](double a) { return a <= -cfg.brake_threshold; });
    if (brake_time < cfg.brake_s || !brake_first) continue;
    const auto [launch_time, launch_first] = phase_time(resume - 1.0, resume + cfg.search_s,
                                                        [&](double a) { return a >= cfg.brake_threshold; });
    if (launch_time < cfg.launch_s) continue;

    DetectedPattern p;
    p.kind = PatternKind::kStopGo;
    p.t_start = *brake_first;
    p.t_end = resume;
    p.t_anchor = stop_begin;
    p.features = stop_go_from_smoothed(t, smooth, stop_begin, resume, cfg);
    out.push_back(p);
  }
  return out;
}

std::vector<DetectedPattern> detect_turn(std::span<const double> t, std::span<const double> heading,
                                         std::span<const double> yaw_rate, std::span<const double> accel_lateral,
                                         const DetectionConfig& cfg) {
  require_aligned(t.size(), heading.size(), "turn");
  require_aligned(t.size(), yaw_rate.size(), "turn");
  require_aligned(t.size(), accel_lateral.size(), "turn");
  std::vector<DetectedPattern> out;
  if (t.size() < 2) return out;
  const double period = median_period(t);
  const auto rate = centred_moving_average(yaw_rate, samples_for(cfg.rate_smooth_s, period));

  auto runs = runs_where(t.size(), [&](std::size_t i) { return std::abs(rate[i]) > cfg.rate_threshold; });
  std::vector<Run> events;
  for (const auto& r : runs) {
    if (!events.empty() && t[r.first] - t[events.back().last] <= cfg.merge_gap_s) {
      events.back().last = r.last;
    } else {
      events.push_back(r);
    }
  }

  for (const auto& e : events) {
    const double ts = t[e.first];
    const double te = t[e.last];
    if (te - ts < cfg.min_event_s) continue;
    const double before = heading[index_at(t, ts - cfg.heading_pad_s)];
    const double after = heading[index_at(t, te + cfg.heading_pad_s)];
    const double delta = angle_diff_deg(after, before);

    DetectedPattern p;
    if (std::abs(delta) >= cfg.turn_angle_min) {
      double lateral = 0.0;
      for (std::size_t i = e.first; i <= e.last; ++i) lateral += accel_lateral[i];
      lateral /= static_cast<double>(e.last - e.first + 1);
      // Centripetal acceleration must not contradict the turn direction.
      if (lateral * delta < 0.0 && std::abs(lateral) > cfg.lateral_tolerance) continue;
      p.kind = PatternKind::kTurn;
    } else if (std::abs(delta) <= cfg.lane_angle_max) {
      p.kind = PatternKind::kLaneChange;
    } else {
      continue;  // ambiguous band
    }
    p.t_start = ts;
    p.t_end = te;
    p.t_anchor = 0.5 * (ts + te);
    p.heading_delta = delta;
    const auto [a, b] = padded(ts, te);
    p.features = resample(t, rate, a, b);
    out.push_back(p);
  }
  return out;
}

std::vector<DetectedPattern> detect_slope(std::span<const double> t, std::span<const double> accel_vertical,
                                          const DetectionConfig& cfg) {
  require_aligned(t.size(), accel_vertical.size(), "slope");
  std::vector<DetectedPattern> out;
  if (t.size() < 2) return out;
  const double period = median_period(t);
  const auto lp = centred_moving_average(accel_vertical, samples_for(cfg.slope_smooth_s, period));

  struct Excursion {
    Run run;
    int sign;
  };
  std::vector<Excursion> excursions;
  for (int sign : {+1, -1}) {
    for (const auto& r : runs_where(t.size(), [&](std::size_t i) { return sign * lp[i] > cfg.slope_threshold; })) {
      if (t[r.last] - t[r.first] + period >= cfg.slope_min_s) excursions.push_back({r, sign});
    }
  }
  std::sort(excursions.begin(), excursions.end(),
            [](const Excursion& a, const Excursion& b) { return a.run.first < b.run.first; });

  for (std::size_t k = 0; k < excursions.size(); ++k) {
    const auto& a = excursions[k];
    DetectedPattern p;
    p.kind = PatternKind::kSlope;
    p.t_start = t[a.run.first];
    if (k + 1 < excursions.size() && excursions[k + 1].sign != a.sign &&
        t[excursions[k + 1].run.first] - t[a.run.last] <= cfg.slope_pair_gap_s) {
      const auto& b = excursions[k + 1];
      p.t_end = t[b.run.last];
      p.t_anchor = 0.5 * (t[a.run.last] + t[b.run.first]);
      ++k;
    } else {
      p.t_end = t[a.run.last];
      p.t_anchor = 0.5 * (p.t_start + p.t_end);
    }
    if (!(p.t_end > p.t_start)) continue;
    const auto [lo, hi] = padded(p.t_start, p.t_end);
    p.features = resample(t, lp, lo, hi);
    out.push_back(p);
  }
  return out;
}

SlopeSignature slope_signature(const DetectedPattern& p) {
  double peak = 0.0;
  for (double v : p.features) peak = std::max(peak, std::abs(v));
  for (double v : p.features) {
    if (std::abs(v) >= 0.5 * peak && peak > 0.0) return v > 0.0 ? SlopeSignature::kUpDown : SlopeSignature::kDownUp;
  }
  return SlopeSignature::kUpDown;
}

// ---------------------------------------------------------------------------
// Matching

double normalized_cross_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa < 1e-24 || sbb < 1e-24) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double fingerprint_similarity(const Features& a, const Features& b) {
  return 0.5 * (normalized_cross_correlation(a, b) + 1.0);
}

std::optional<LandmarkMatch> match_landmark(const DetectedPattern& p, const GeoPoint& x,
                                            std::span<const LandmarkFingerprint> db, const MatchConfig& cfg) {
  if (!(cfg.radius_m > 0.0) || !(cfg.d0_m > 0.0) || cfg.alpha < 0.0 || cfg.alpha > 1.0) {
    throw Error(ErrorCode::kInvalidValue, "match config needs radius > 0, d0 > 0, alpha in [0, 1]");
  }
  std::optional<LandmarkMatch> best;
  for (std::size_t i = 0; i < db.size(); ++i) {
    const auto& lm = db[i];
    if (lm.kind != p.kind) continue;
    const double d = geodesic_distance(x, lm.location);
    if (d > cfg.radius_m) continue;
    const double m = fingerprint_similarity(lm.fingerprint, p.features);
    const double score = cfg.alpha * m + (1.0 - cfg.alpha) * std::exp(-d / cfg.d0_m);
    if (!best || score > best->score) best = LandmarkMatch{i, lm, score, m, d};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Queue correction

void validate(const QueueProfile& profile) {
  if (!(profile.vehicle_length > 0.0)) throw Error(ErrorCode::kInvalidValue, "vehicle length must be positive");
  for (const auto& [name, b] : profile.buckets) {
    if (b.mu < 0.0 || b.sigma < 0.0) {
      throw Error(ErrorCode::kInvalidValue, fmt::format("queue bucket \"{}\" has negative mu/sigma", name));
    }
  }
}

double queue_correction(const QueueProfile& profile, const std::string& bucket) {
  const auto it = profile.buckets.find(bucket);
  if (it == profile.buckets.end()) {
    throw Error(ErrorCode::kUnknownBucket, fmt::format("no queue bucket named \"{}\"", bucket));
  }
  return it->second.mu * profile.vehicle_length / 2.0;
}

// ---------------------------------------------------------------------------
// Database I/O

std::vector<LandmarkFingerprint> load_landmark_db(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open landmark DB {}", path.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::kParse, "landmark DB must be a JSON array");
  std::vector<LandmarkFingerprint> db;
  db.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    try {
      LandmarkFingerprint lm;
      lm.id = e.at("id").get<std::string>();
      lm.db_kind = e.at("kind").get<std::string>();
      lm.kind = pattern_kind_for(lm.db_kind);
      lm.location = GeoPoint::make(e.at("lat").get<double>(), e.at("lon").get<double>());
      const auto& fp = e.at("fingerprint");
      if (!fp.is_array() || fp.size() != kFeatureLength) {
        throw Error(ErrorCode::kParse, fmt::format("landmark {} fingerprint must have {} values", lm.id, kFeatureLength));
      }
      for (std::size_t k = 0; k < kFeatureLength; ++k) {
        lm.fingerprint[k] = fp[k].get<double>();
        if (!std::isfinite(lm.fingerprint[k])) throw Error(ErrorCode::kParse, "non-finite fingerprint value");
      }
      db.push_back(std::move(lm));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::kParse, fmt::format("landmark entry {}: {}", i, ex.what()));
    }
  }
  return db;
}

void save_landmark_db(const std::filesystem::path& path, std::span<const LandmarkFingerprint> db) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& lm : db) {
    j.push_back({{"id", lm.id},
                 {"kind", lm.db_kind},
                 {"lat", lm.location.lat},
                 {"lon", lm.location.lon},
                 {"fingerprint", lm.fingerprint}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write landmark DB {}", path.string()));
  out << j.dump(2) << '\n';
}

}  // namespace drnav

#include "drnav/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "drnav/error.hpp"

namespace drnav {

using nlohmann::json;

namespace {

bool finite(const Eigen::Vector3d& v) { return v.allFinite(); }

double number_field(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw Error(ErrorCode::kParse, fmt::format("missing or non-numeric field \"{}\"", key), line);
  }
  return it->get<double>();
}

}  // namespace

void validate(const ImuSample& s) {
  if (!std::isfinite(s.t) || s.t < 0.0) {
    throw Error(ErrorCode::kInvalidValue, fmt::format("IMU timestamp {} must be finite and non-negative", s.t));
  }
  if (!finite(s.accel_body) || !finite(s.gyro_body) || !finite(s.mag_body)) {
    throw Error(ErrorCode::kInvalidValue, fmt::format("IMU sample at t={} contains NaN/Inf", s.t));
  }
}

void validate(const GpsFix& f) {
  if (!std::isfinite(f.t) || f.t < 0.0) {
    throw Error(ErrorCode::kInvalidValue, fmt::format("GPS timestamp {} must be finite and non-negative", f.t));
  }
  if (!is_valid(f.position())) {
    throw Error(ErrorCode::kOutOfRange, fmt::format("GPS fix at t={} has invalid coordinates", f.t));
  }
  if (!(f.accuracy > 0.0) || !std::isfinite(f.accuracy)) {
    throw Error(ErrorCode::kInvalidValue, fmt::format("GPS fix at t={} has non-positive accuracy", f.t));
  }
  if (f.speed && (!std::isfinite(*f.speed) || *f.speed < 0.0)) {
    throw Error(ErrorCode::kInvalidValue, fmt::format("GPS fix at t={} has negative speed", f.t));
  }
}

void validate(const Trace& trace) {
  if (trace.imu.empty()) throw Error(ErrorCode::kEmptyTrace, "trace has no IMU samples");
  for (std::size_t i = 0; i < trace.imu.size(); ++i) {
    validate(trace.imu[i]);
    if (i > 0 && !(trace.imu[i].t > trace.imu[i - 1].t)) {
      throw Error(ErrorCode::kOrdering, fmt::format("IMU timestamps not strictly increasing at t={}", trace.imu[i].t));
    }
  }
  for (std::size_t i = 0; i < trace.gps.size(); ++i) {
    validate(trace.gps[i]);
    if (i > 0 && !(trace.gps[i].t > trace.gps[i - 1].t)) {
      throw Error(ErrorCode::kOrdering, fmt::format("GPS timestamps not strictly increasing at t={}", trace.gps[i].t));
    }
  }
  if (trace.gps.size() > trace.imu.size()) {
    throw Error(ErrorCode::kInvalidValue, "GPS rate exceeds IMU rate");
  }
}

Trace read_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
      throw Error(ErrorCode::kParse, "record must be an object with a string \"type\"", line_no);
    }
    const auto type = j["type"].get<std::string>();
    if (type == "imu") {
      ImuSample s;
      s.t = number_field(j, "t", line_no);
      s.accel_body = {number_field(j, "ax", line_no), number_field(j, "ay", line_no), number_field(j, "az", line_no)};
      s.gyro_body = {number_field(j, "gx", line_no), number_field(j, "gy", line_no), number_field(j, "gz", line_no)};
      s.mag_body = {number_field(j, "mx", line_no), number_field(j, "my", line_no), number_field(j, "mz", line_no)};
      if (!trace.imu.empty() && !(s.t > trace.imu.back().t)) {
        throw Error(ErrorCode::kOrdering, fmt::format("IMU timestamp {} does not increase", s.t), line_no);
      }
      trace.imu.push_back(s);
    } else if (type == "gps") {
      GpsFix f;
      f.t = number_field(j, "t", line_no);
      f.lat = number_field(j, "lat", line_no);
      f.lon = number_field(j, "lon", line_no);
      f.accuracy = number_field(j, "acc", line_no);
      if (auto it = j.find("speed"); it != j.end() && !it->is_null()) f.speed = number_field(j, "speed", line_no);
      if (!trace.gps.empty() && !(f.t > trace.gps.back().t)) {
        throw Error(ErrorCode::kOrdering, fmt::format("GPS timestamp {} does not increase", f.t), line_no);
      }
      trace.gps.push_back(f);
    } else {
      throw Error(ErrorCode::kParse, fmt::format("unknown record type \"{}\"", type), line_no);
    }
  }
  validate(trace);
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open trace file {}", path.string()));
  return read_trace(in);
}

void write_trace(std::ostream& out, const Trace& trace) {
  std::size_t i = 0;
  std::size_t g = 0;
  while (i < trace.imu.size() || g < trace.gps.size()) {
    const bool take_imu = g >= trace.gps.size() || (i < trace.imu.size() && trace.imu[i].t <= trace.gps[g].t);
    json j;
    if (take_imu) {
      const auto& s = trace.imu[i++];
      j = json{{"type", "imu"}, {"t", s.t},
               {"ax", s.accel_body.x()}, {"ay", s.accel_body.y()}, {"az", s.accel_body.z()},
               {"gx", s.gyro_body.x()}, {"gy", s.gyro_body.y()}, {"gz", s.gyro_body.z()},
               {"mx", s.mag_body.x()}, {"my", s.mag_body.y()}, {"mz", s.mag_body.z()}};
    } else {
      const auto& f = trace.gps[g++];
      j = json{{"type", "gps"}, {"t", f.t}, {"lat", f.lat}, {"lon", f.lon}, {"acc", f.accuracy}};
      if (f.speed) j["speed"] = *f.speed;
    }
    out << j.dump() << '\n';
  }
}

void save_trace(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write trace file {}", path.string()));
  write_trace(out, trace);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("failed writing {}", path.string()));
}

double imu_period(const Trace& trace) {
  if (trace.imu.size() < 2) return 0.0;
  std::vector<double> dts;
  dts.reserve(trace.imu.size() - 1);
  for (std::size_t i = 1; i < trace.imu.size(); ++i) dts.push_back(trace.imu[i].t - trace.imu[i - 1].t);
  auto mid = dts.begin() + static_cast<std::ptrdiff_t>(dts.size() / 2);
  std::nth_element(dts.begin(), mid, dts.end());
  return *mid;
}

std::vector<TimeSlot> partition_slots(const Trace& trace, double slot_s) {
  if (!(slot_s > 0.0)) throw Error(ErrorCode::kInvalidValue, "slot duration must be positive");
  if (trace.imu.empty()) throw Error(ErrorCode::kEmptyTrace, "cannot partition an empty trace");

  const double t0 = trace.imu.front().t;
  const double period = imu_period(trace);
  const double covered = trace.imu.back().t - t0 + period;
  const auto n_slots = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(covered / slot_s)));
  const double eps = 1e-9 * slot_s;

  std::vector<TimeSlot> slots(n_slots);
  for (std::size_t k = 0; k < n_slots; ++k) {
    slots[k].index = k;
    slots[k].t_start = t0 + static_cast<double>(k) * slot_s;
    slots[k].t_end = t0 + static_cast<double>(k + 1) * slot_s;
  }

  std::size_t i = 0;
  for (std::size_t k = 0; k < n_slots; ++k) {
    slots[k].imu_begin = i;
    if (k + 1 == n_slots) {
      i = trace.imu.size();
    } else {
      while (i < trace.imu.size() && trace.imu[i].t < slots[k].t_end - eps) ++i;
    }
    slots[k].imu_end = i;
    if (slots[k].imu_begin == slots[k].imu_end) {
      throw Error(ErrorCode::kInvalidValue, fmt::format("slot {} contains no IMU samples (IMU gap)", k));
    }
  }

  const double half = slot_s / 2.0;
  for (auto& slot : slots) {
    auto it = std::lower_bound(trace.gps.begin(), trace.gps.end(), slot.t_end,
                               [](const GpsFix& f, double t) { return f.t < t; });
    const GpsFix* best = nullptr;
    double best_gap = half;
    if (it != trace.gps.end() && std::abs(it->t - slot.t_end) <= best_gap) {
      best = &*it;
      best_gap = std::abs(it->t - slot.t_end);
    }
    if (it != trace.gps.begin()) {
      const auto& prev = *std::prev(it);
      if (std::abs(prev.t - slot.t_end) <= best_gap) best = &prev;  // tie goes to the earlier fix
    }
    if (best) slot.gps_at_end = *best;
  }
  return slots;
}

}  // namespace drnav

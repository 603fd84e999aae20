#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "drnav/geo.hpp"

namespace drnav {

/// One inertial sample in the phone body frame (x forward, y right, z down).
/// Accelerometer reports specific force, so a level phone at rest reads
/// (0, 0, -g).
struct ImuSample {
  double t = 0.0;              // s
  Eigen::Vector3d accel_body;  // m/s^2
  Eigen::Vector3d gyro_body;   // rad/s
  Eigen::Vector3d mag_body;    // microtesla

  bool operator==(const ImuSample&) const = default;
};

struct GpsFix {
  double t = 0.0;
  double lat = 0.0;
  double lon = 0.0;
  double accuracy = 1.0;        // m, > 0
  std::optional<double> speed;  // m/s, receiver (Doppler) speed when present

  GeoPoint position() const { return {lat, lon}; }
  bool operator==(const GpsFix&) const = default;
};

struct Trace {
  std::vector<ImuSample> imu;
  std::vector<GpsFix> gps;

  bool operator==(const Trace&) const = default;
};

/// Checks every record and ordering invariant; throws drnav::Error.
void validate(const ImuSample& s);
void validate(const GpsFix& f);
void validate(const Trace& trace);

/// JSONL trace I/O. Each record type must be internally ordered by time; the
/// two types may be interleaved arbitrarily.
Trace load_trace(const std::filesystem::path& path);
Trace read_trace(std::istream& in);
void save_trace(const std::filesystem::path& path, const Trace& trace);
void write_trace(std::ostream& out, const Trace& trace);

struct TimeSlot {
  std::size_t index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t imu_begin = 0;  // [imu_begin, imu_end) into Trace::imu
  std::size_t imu_end = 0;
  std::optional<GpsFix> gps_at_end;

  double duration() const { return t_end - t_start; }
  std::size_t imu_count() const { return imu_end - imu_begin; }
};

/// Median spacing between consecutive IMU samples.
double imu_period(const Trace& trace);

/// Splits the trace into contiguous slots of `slot_s` seconds starting at the
/// first IMU sample. Samples past the last full boundary are absorbed by the
/// last slot. A slot's `gps_at_end` is the fix nearest its end time within
/// slot_s / 2.
std::vector<TimeSlot> partition_slots(const Trace& trace, double slot_s);

}  // namespace drnav

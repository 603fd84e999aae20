#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "drnav/trace.hpp"

namespace drnav::test {

inline constexpr double kG = 9.80665;

// Level phone, x forward. Field of 20 uT horizontal, 45 uT down.
inline ImuSample level_sample(double t, double forward_accel = 0.0, double yaw_rate = 0.0, double heading_deg = 0.0) {
  ImuSample s;
  s.t = t;
  s.accel_body = Eigen::Vector3d(forward_accel, 0.0, -kG);
  s.gyro_body = Eigen::Vector3d(0.0, 0.0, yaw_rate);
  const double h = heading_deg * kDegToRad;
  s.mag_body = Eigen::Vector3d(20.0 * std::cos(h), -20.0 * std::sin(h), 45.0);
  return s;
}

// Fresh directory under the build tree's temp area, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = std::filesystem::temp_directory_path() /
            ("drnav_" + tag + "_" + (info ? std::string(info->name()) : std::string("x")));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace drnav::test

#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stsc/time.hpp"

namespace stsc {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

/// Per-sensor speed series on a uniform 5-minute grid covering the daily
/// window of every calendar day in [first_day, first_day + day_count).
/// Rows are time, columns are sensors; NaN marks a missing reading.
class SpeedMatrix {
 public:
  SpeedMatrix() = default;
  SpeedMatrix(Day first_day, std::size_t day_count, std::vector<std::string> sensors,
              DayWindow window = {});

  std::size_t time_count() const noexcept { return day_count_ * window_.slots(); }
  std::size_t sensor_count() const noexcept { return sensors_.size(); }
  std::size_t day_count() const noexcept { return day_count_; }
  std::size_t slots_per_day() const noexcept { return window_.slots(); }
  Day first_day() const noexcept { return first_day_; }
  const DayWindow& window() const noexcept { return window_; }
  const std::vector<std::string>& sensors() const noexcept { return sensors_; }

  std::size_t row(std::size_t day, std::size_t slot) const { return day * slots_per_day() + slot; }
  TimePoint time(std::size_t row) const;
  std::vector<TimePoint> times() const;
  /// Row of an on-grid timestamp, or nullopt when outside the grid.
  std::optional<std::size_t> row_of(TimePoint t) const;

  std::optional<std::size_t> find_sensor(std::string_view id) const;
  /// Throws Errc::not_found.
  std::size_t sensor_index(std::string_view id) const;

  double& at(std::size_t row, std::size_t col) { return values_[row * sensors_.size() + col]; }
  double at(std::size_t row, std::size_t col) const { return values_[row * sensors_.size() + col]; }
  std::vector<double> column(std::size_t col) const;
  std::span<const double> values() const noexcept { return values_; }

  /// Keeps the given columns in the given order.
  SpeedMatrix select_sensors(std::span<const std::size_t> cols) const;
  std::size_t missing_count() const;

  friend bool operator==(const SpeedMatrix& a, const SpeedMatrix& b);

 private:
  Day first_day_{};
  std::size_t day_count_ = 0;
  DayWindow window_{};
  std::vector<std::string> sensors_;
  std::vector<double> values_;
};

struct SensorInfo {
  std::string id;
  double latitude = 0.0;
  double longitude = 0.0;
  std::string highway;
  std::string direction;
};

struct DistanceOverride {
  std::string from_id;
  std::string to_id;
  double km = 0.0;
};

/// Sensors with a symmetric, zero-diagonal distance matrix in kilometres.
class SensorNetwork {
 public:
  SensorNetwork() = default;
  SensorNetwork(std::vector<SensorInfo> sensors, std::vector<double> km);

  std::size_t size() const noexcept { return sensors_.size(); }
  const std::vector<SensorInfo>& sensors() const noexcept { return sensors_; }
  double distance(std::size_t i, std::size_t j) const { return km_[i * sensors_.size() + j]; }
  std::optional<std::size_t> find(std::string_view id) const;
  /// Throws Errc::not_found.
  std::size_t index_of(std::string_view id) const;
  /// Network restricted to `ids`, in that order.
  SensorNetwork subset(std::span<const std::string> ids) const;

 private:
  std::vector<SensorInfo> sensors_;
  std::vector<double> km_;
};

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle distance; throws Errc::range for invalid coordinates.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

/// Haversine distances between all sensors; explicit overrides replace the
/// computed value for both (from, to) and (to, from).
SensorNetwork build_distance_matrix(std::vector<SensorInfo> sensors,
                                    std::span<const DistanceOverride> overrides = {});

// CSV formats:
//   speeds:    timestamp,sensor_id,speed_mph   (timestamp "YYYY-MM-DD HH:MM", empty = missing)
//   sensors:   sensor_id,latitude,longitude,highway,direction
//   distances: from_id,to_id,km

/// Rows outside the daily window are discarded. Throws Errc::parse (with the
/// line number) on malformed rows and Errc::duplicate on repeated cells.
SpeedMatrix load_speed_csv(const std::filesystem::path& path, DayWindow window = {});
SpeedMatrix parse_speed_csv(std::string_view text, DayWindow window = {});
std::string speed_csv(const SpeedMatrix& m);

std::vector<SensorInfo> load_sensors_csv(const std::filesystem::path& path);
std::vector<SensorInfo> parse_sensors_csv(std::string_view text);
std::string sensors_csv(const std::vector<SensorInfo>& sensors);

std::vector<DistanceOverride> load_distances_csv(const std::filesystem::path& path);
std::vector<DistanceOverride> parse_distances_csv(std::string_view text);

}  // namespace stsc

#pragma once

#include <string>
#include <vector>

#include "stsc/speed_data.hpp"

namespace stsc {

struct CleaningConfig {
  double max_missing_fraction = 0.10;
  double valid_low = 0.0;    // mph
  double valid_high = 120.0; // mph
  std::size_t outlier_window = 5;

  void validate() const;
  bool in_range(double v) const { return v >= valid_low && v <= valid_high; }
};

struct DroppedSensor {
  std::string id;
  double missing_fraction = 0.0;
};

struct CleanReport {
  std::vector<DroppedSensor> dropped;
  std::size_t interpolated = 0;  // gaps bridged linearly inside a day
  std::size_t edge_filled = 0;   // leading/trailing gaps and empty days
  std::size_t outliers_replaced = 0;
};

struct CleanResult {
  SpeedMatrix matrix;
  CleanReport report;
};

/// Drops sensors whose missing fraction exceeds the threshold, then fills
/// the remaining gaps day by day: linear interpolation between the nearest
/// in-range readings, nearest-edge fill at the day's ends. A day with no
/// usable reading copies the same slots from the nearest usable day. Gaps
/// never bridge two days.
CleanResult clean_missing(const SpeedMatrix& matrix, const CleaningConfig& config);

/// Replaces out-of-range readings with the mean of the in-range readings in
/// a centred window (same day, excluding the reading itself). Falls back to
/// the sensor's in-range daily mean, then to the nearest range bound.
SpeedMatrix clean_outliers(const SpeedMatrix& matrix, const CleaningConfig& config,
                           CleanReport* report = nullptr);

/// clean_missing followed by clean_outliers.
CleanResult clean(const SpeedMatrix& matrix, const CleaningConfig& config);

}  // namespace stsc

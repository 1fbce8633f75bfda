#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stsc/speed_data.hpp"

namespace stsc {

/// Synthetic loop-detector field: a line of sensors 1 km apart whose
/// congestion dips propagate downstream one 5-minute step per sensor.
struct SynthConfig {
  std::size_t sensor_count = 20;
  std::size_t day_count = 56;
  std::uint64_t rng_seed = 42;
  std::string start_date = "2017-06-01";

  double base_speed = 65.0;           // mph
  double morning_dip = 25.0;          // amplitude at 08:30
  double evening_dip = 30.0;          // amplitude at 18:00
  double rush_width_min = 45.0;       // gaussian std-dev, minutes
  double weekend_uplift = 5.0;        // mph added on Sat/Sun
  double weekend_dip_scale = 0.3;     // dips shrink on weekends
  double sensor_offset_std = 3.0;     // fixed per-sensor offset
  std::size_t lag_steps_per_sensor = 1;
  double daily_level_std = 3.0;       // network-wide offset drawn per day
  double daily_amplitude_jitter = 0.25;  // dips scaled by 1 + U(-j, j) per day
  double noise_std = 1.5;
  double missing_rate = 0.01;
  double outlier_rate = 0.002;

  void validate() const;
};

enum class Injection : std::uint8_t { none = 0, missing = 1, outlier = 2 };

struct SynthResult {
  SpeedMatrix observed;   // noisy field with injected gaps and outliers
  SpeedMatrix truth;      // noiseless field
  std::vector<Injection> injected;  // same layout as SpeedMatrix values
  std::vector<SensorInfo> sensors;
  SensorNetwork network;
  std::vector<double> sensor_offsets;
  std::vector<double> day_levels;
  std::vector<double> day_dip_scales;
};

/// Congestion profile (mph of slowdown) at a time of day, before scaling.
double congestion_profile(const SynthConfig& config, double minute_of_day);

SynthResult generate_synthetic(const SynthConfig& config);

}  // namespace stsc

#include "stsc/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "stsc/error.hpp"
#include "stsc/tensor.hpp"

namespace stsc {

void SynthConfig::validate() const {
  if (sensor_count < 1 || day_count < 1)
    throw Error(Errc::config, "synthetic data needs at least one sensor and one day");
  if (!(noise_std >= 0.0) || !(rush_width_min > 0.0))
    throw Error(Errc::config, "noise_std must be >= 0 and rush_width_min > 0");
  for (double r : {missing_rate, outlier_rate})
    if (!(r >= 0.0 && r < 1.0)) throw Error(Errc::config, "injection rates must lie in [0, 1)");
  if (!(daily_amplitude_jitter >= 0.0 && daily_amplitude_jitter < 1.0))
    throw Error(Errc::config, "daily_amplitude_jitter must lie in [0, 1)");
  parse_date(start_date);
}

double congestion_profile(const SynthConfig& config, double minute_of_day) {
  auto bump = [&](double centre) {
    const double z = (minute_of_day - centre) / config.rush_width_min;
    return std::exp(-0.5 * z * z);
  };
  return config.morning_dip * bump(8.5 * 60.0) + config.evening_dip * bump(18.0 * 60.0);
}

SynthResult generate_synthetic(const SynthConfig& config) {
  config.validate();
  const Day first = parse_date(config.start_date);
  SynthResult out;

  // Sensors due north from a fixed origin, exactly 1 km apart along the meridian.
  const double km_per_degree = kEarthRadiusKm * std::numbers::pi / 180.0;
  std::vector<std::string> ids;
  for (std::size_t k = 0; k < config.sensor_count; ++k) {
    SensorInfo s;
    s.id = "S" + std::to_string(k + 1);
    s.latitude = 34.0 + static_cast<double>(k) / km_per_degree;
    s.longitude = -118.25;
    s.highway = "SYN";
    s.direction = "N";
    ids.push_back(s.id);
    out.sensors.push_back(std::move(s));
  }
  out.network = build_distance_matrix(out.sensors);

  Rng rng(config.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t k = 0; k < config.sensor_count; ++k)
    out.sensor_offsets.push_back(config.sensor_offset_std * normal(rng));
  for (std::size_t d = 0; d < config.day_count; ++d) {
    const bool weekend = is_weekend(first + std::chrono::days{d});
    out.day_levels.push_back(config.daily_level_std * normal(rng) +
                             (weekend ? config.weekend_uplift : 0.0));
    const double jitter = config.daily_amplitude_jitter * (2.0 * unit(rng) - 1.0);
    out.day_dip_scales.push_back((weekend ? config.weekend_dip_scale : 1.0) * (1.0 + jitter));
  }

  out.truth = SpeedMatrix(first, config.day_count, ids);
  const DayWindow& window = out.truth.window();
  for (std::size_t d = 0; d < config.day_count; ++d)
    for (std::size_t s = 0; s < window.slots(); ++s) {
      const double tod = static_cast<double>((window.start + kStep * static_cast<long>(s)).count());
      for (std::size_t k = 0; k < config.sensor_count; ++k) {
        const double lag = 5.0 * static_cast<double>(k * config.lag_steps_per_sensor);
        out.truth.at(out.truth.row(d, s), k) =
            config.base_speed + out.sensor_offsets[k] + out.day_levels[d] -
            out.day_dip_scales[d] * congestion_profile(config, tod - lag);
      }
    }

  out.observed = out.truth;
  out.injected.assign(out.truth.values().size(), Injection::none);
  for (std::size_t r = 0; r < out.observed.time_count(); ++r)
    for (std::size_t k = 0; k < config.sensor_count; ++k) {
      double& v = out.observed.at(r, k);
      if (config.noise_std > 0.0) v = std::max(3.0, v + config.noise_std * normal(rng));
      const std::size_t flat = r * config.sensor_count + k;
      if (config.missing_rate > 0.0 && unit(rng) < config.missing_rate) {
        v = kMissing;
        out.injected[flat] = Injection::missing;
      } else if (config.outlier_rate > 0.0 && unit(rng) < config.outlier_rate) {
        v = unit(rng) < 0.5 ? 130.0 + 70.0 * unit(rng) : -1.0 - 20.0 * unit(rng);
        out.injected[flat] = Injection::outlier;
      }
    }
  return out;
}

}  // namespace stsc

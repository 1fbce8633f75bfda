#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "stsc/dataset.hpp"
#include "stsc/tensor.hpp"

namespace stsc {

struct Metrics {
  double mae = 0.0;   // mph
  double rmse = 0.0;  // mph
  double mape = 0.0;  // percent, over entries with |actual| >= 1 mph
  std::size_t n = 0;
  std::size_t mape_skipped = 0;
};

/// Throws Errc::empty_input on empty vectors, Errc::dimension on a length
/// mismatch. MAPE is NaN when every entry was skipped.
Metrics compute_metrics(std::span<const double> actual, std::span<const double> predicted);

inline constexpr std::array<std::size_t, 5> kReportHorizons{5, 15, 30, 45, 60};

/// Prediction component (1-based) for a horizon in minutes.
std::size_t horizon_component(std::size_t horizon_min);

struct HorizonMetrics {
  std::size_t horizon_min = 0;
  Metrics metrics;
};

struct MetricsReport {
  std::string technique;
  std::vector<HorizonMetrics> rows;

  const Metrics& at(std::size_t horizon_min) const;
};

/// Targets of a sample set in mph, row-major (N, horizon).
Tensor actual_mph(const SampleSet& samples, const NormalizationParams& params);

/// `predicted` is (N, horizon) in mph, aligned with `samples`.
MetricsReport evaluate_horizons(std::string technique, const Tensor& predicted,
                                const SampleSet& samples, const NormalizationParams& params,
                                std::span<const std::size_t> horizons = kReportHorizons);

struct SensorError {
  std::string sensor_id;
  double mae = 0.0;
};

/// MAE per target sensor at one horizon, sorted by sensor id.
std::vector<SensorError> per_sensor_mae(const Tensor& predicted, const SampleSet& samples,
                                        const NormalizationParams& params, std::size_t horizon_min);

}  // namespace stsc

#include "stsc/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "stsc/error.hpp"

namespace stsc {

Metrics compute_metrics(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.empty() || predicted.empty()) throw Error(Errc::empty_input, "metrics over no values");
  if (actual.size() != predicted.size())
    throw Error(Errc::dimension, "metrics: " + std::to_string(actual.size()) + " actual vs " +
                                     std::to_string(predicted.size()) + " predicted values");
  Metrics m;
  m.n = actual.size();
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = predicted[i] - actual[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (std::abs(actual[i]) < 1.0) {
      ++m.mape_skipped;
    } else {
      pct_sum += std::abs(e / actual[i]);
    }
  }
  const auto n = static_cast<double>(m.n);
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  const std::size_t counted = m.n - m.mape_skipped;
  m.mape = counted ? 100.0 * pct_sum / static_cast<double>(counted)
                   : std::numeric_limits<double>::quiet_NaN();
  return m;
}

std::size_t horizon_component(std::size_t horizon_min) {
  if (horizon_min == 0 || horizon_min % 5 != 0)
    throw Error(Errc::config, "horizon " + std::to_string(horizon_min) +
                                  " min is not a positive multiple of 5");
  return horizon_min / 5;
}

const Metrics& MetricsReport::at(std::size_t horizon_min) const {
  for (const auto& r : rows)
    if (r.horizon_min == horizon_min) return r.metrics;
  throw Error(Errc::not_found, technique + " has no " + std::to_string(horizon_min) + "-min row");
}

Tensor actual_mph(const SampleSet& samples, const NormalizationParams& params) {
  Tensor out({samples.size(), samples.horizon()});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto y = samples.y_values(i);
    for (std::size_t k = 0; k < y.size(); ++k) out[i * y.size() + k] = params.denormalize(y[k]);
  }
  return out;
}

namespace {

std::vector<double> component(const Tensor& t, std::size_t col) {
  const std::size_t n = t.dim(0), width = t.size() / n;
  if (col >= width)
    throw Error(Errc::dimension, "prediction has " + std::to_string(width) + " steps, asked for step " +
                                     std::to_string(col + 1));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = t[i * width + col];
  return out;
}

void check_aligned(const Tensor& predicted, const SampleSet& samples) {
  if (samples.empty()) throw Error(Errc::empty_input, "evaluation over an empty sample set");
  if (predicted.rank() < 1 || predicted.dim(0) != samples.size() ||
      predicted.size() != samples.size() * samples.horizon())
    throw Error(Errc::dimension, "predictions " + shape_str(predicted.shape()) + " do not match " +
                                     std::to_string(samples.size()) + " samples");
}

}  // namespace

MetricsReport evaluate_horizons(std::string technique, const Tensor& predicted,
                                const SampleSet& samples, const NormalizationParams& params,
                                std::span<const std::size_t> horizons) {
  check_aligned(predicted, samples);
  const Tensor actual = actual_mph(samples, params);
  MetricsReport report{std::move(technique), {}};
  for (std::size_t h : horizons) {
    const std::size_t col = horizon_component(h) - 1;
    report.rows.push_back({h, compute_metrics(component(actual, col), component(predicted, col))});
  }
  return report;
}

std::vector<SensorError> per_sensor_mae(const Tensor& predicted, const SampleSet& samples,
                                        const NormalizationParams& params, std::size_t horizon_min) {
  check_aligned(predicted, samples);
  const std::size_t col = horizon_component(horizon_min) - 1;
  const std::size_t width = samples.horizon();
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double actual = params.denormalize(samples.y_values(i)[col]);
    auto& [sum, n] = acc[samples.info(i).target];
    sum += std::abs(predicted[i * width + col] - actual);
    ++n;
  }
  std::vector<SensorError> out;
  for (const auto& [id, v] : acc) out.push_back({id, v.first / static_cast<double>(v.second)});
  return out;
}

}  // namespace stsc

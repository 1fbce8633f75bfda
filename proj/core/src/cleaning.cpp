#include "stsc/cleaning.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "stsc/error.hpp"

namespace stsc {

void CleaningConfig::validate() const {
  if (!(max_missing_fraction > 0.0 && max_missing_fraction < 1.0))
    throw Error(Errc::config, "max_missing_fraction must lie in (0, 1)");
  if (!(valid_low < valid_high)) throw Error(Errc::config, "valid speed range needs low < high");
  if (outlier_window < 3 || outlier_window % 2 == 0)
    throw Error(Errc::config, "outlier_window must be odd and >= 3");
}

namespace {

// Fills one day of one sensor in place. Returns false if the day has no
// usable reading (left untouched).
bool fill_day(std::span<double> day, const CleaningConfig& config, CleanReport& report) {
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < day.size(); ++i)
    if (!is_missing(day[i]) && config.in_range(day[i])) valid.push_back(i);
  if (valid.empty()) return false;

  for (std::size_t i = 0; i < valid.front(); ++i)
    if (is_missing(day[i])) {
      day[i] = day[valid.front()];
      ++report.edge_filled;
    }
  for (std::size_t i = valid.back() + 1; i < day.size(); ++i)
    if (is_missing(day[i])) {
      day[i] = day[valid.back()];
      ++report.edge_filled;
    }
  for (std::size_t k = 0; k + 1 < valid.size(); ++k) {
    const std::size_t a = valid[k], b = valid[k + 1];
    for (std::size_t i = a + 1; i < b; ++i) {
      if (!is_missing(day[i])) continue;
      const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
      day[i] = day[a] + w * (day[b] - day[a]);
      ++report.interpolated;
    }
  }
  return true;
}

}  // namespace

CleanResult clean_missing(const SpeedMatrix& matrix, const CleaningConfig& config) {
  config.validate();
  CleanResult result;
  if (matrix.time_count() == 0 || matrix.sensor_count() == 0) {
    result.matrix = matrix;
    return result;
  }

  std::vector<std::size_t> kept;
  const double total = static_cast<double>(matrix.time_count());
  for (std::size_t c = 0; c < matrix.sensor_count(); ++c) {
    std::size_t missing = 0;
    for (std::size_t r = 0; r < matrix.time_count(); ++r) missing += is_missing(matrix.at(r, c));
    const double fraction = static_cast<double>(missing) / total;
    if (fraction > config.max_missing_fraction)
      result.report.dropped.push_back({matrix.sensors()[c], fraction});
    else
      kept.push_back(c);
  }

  SpeedMatrix out = matrix.select_sensors(kept);
  const std::size_t slots = out.slots_per_day();
  std::vector<double> series(slots);
  for (std::size_t c = 0; c < out.sensor_count(); ++c) {
    std::vector<bool> usable(out.day_count(), false);
    for (std::size_t d = 0; d < out.day_count(); ++d) {
      for (std::size_t s = 0; s < slots; ++s) series[s] = out.at(out.row(d, s), c);
      usable[d] = fill_day(series, config, result.report);
      if (usable[d])
        for (std::size_t s = 0; s < slots; ++s) out.at(out.row(d, s), c) = series[s];
    }
    for (std::size_t d = 0; d < out.day_count(); ++d) {
      if (usable[d]) continue;
      std::optional<std::size_t> source;
      for (std::size_t dist = 1; dist < out.day_count() && !source; ++dist) {
        if (dist <= d && usable[d - dist]) source = d - dist;
        else if (d + dist < out.day_count() && usable[d + dist]) source = d + dist;
      }
      if (!source) continue;  // unreachable: a kept sensor has some usable reading
      for (std::size_t s = 0; s < slots; ++s) {
        double& cell = out.at(out.row(d, s), c);
        if (is_missing(cell)) {
          cell = out.at(out.row(*source, s), c);
          ++result.report.edge_filled;
        }
      }
    }
  }
  result.matrix = std::move(out);
  return result;
}

SpeedMatrix clean_outliers(const SpeedMatrix& matrix, const CleaningConfig& config,
                           CleanReport* report) {
  config.validate();
  SpeedMatrix out = matrix;
  const std::size_t slots = matrix.slots_per_day();
  const std::size_t half = config.outlier_window / 2;
  for (std::size_t c = 0; c < matrix.sensor_count(); ++c) {
    for (std::size_t d = 0; d < matrix.day_count(); ++d) {
      auto value = [&](std::size_t s) { return matrix.at(matrix.row(d, s), c); };
      std::optional<double> daily_mean;
      for (std::size_t s = 0; s < slots; ++s) {
        const double v = value(s);
        if (is_missing(v))
          throw Error(Errc::state, "clean_outliers requires gap-free input; run clean_missing first");
        if (config.in_range(v)) continue;

        double sum = 0.0;
        std::size_t count = 0;
        const std::size_t lo = s >= half ? s - half : 0;
        const std::size_t hi = std::min(slots - 1, s + half);
        for (std::size_t k = lo; k <= hi; ++k) {
          if (k == s || !config.in_range(value(k))) continue;
          sum += value(k);
          ++count;
        }
        double replacement;
        if (count > 0) {
          replacement = sum / static_cast<double>(count);
        } else {
          if (!daily_mean) {
            double dsum = 0.0;
            std::size_t dcount = 0;
            for (std::size_t k = 0; k < slots; ++k)
              if (config.in_range(value(k))) {
                dsum += value(k);
                ++dcount;
              }
            daily_mean = dcount > 0 ? dsum / static_cast<double>(dcount)
                                    : std::clamp(v, config.valid_low, config.valid_high);
          }
          replacement = *daily_mean;
        }
        out.at(matrix.row(d, s), c) = replacement;
        if (report) ++report->outliers_replaced;
      }
    }
  }
  return out;
}

CleanResult clean(const SpeedMatrix& matrix, const CleaningConfig& config) {
  CleanResult result = clean_missing(matrix, config);
  result.matrix = clean_outliers(result.matrix, config, &result.report);
  return result;
}

}  // namespace stsc

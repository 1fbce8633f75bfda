#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stsc/metrics.hpp"
#include "stsc/neighbors.hpp"
#include "stsc/stats.hpp"

namespace stsc {

/// technique,horizon_min,mae,rmse,mape,n
std::string metrics_csv(std::span<const MetricsReport> reports);

/// target,rank,sensor_id,closeness,corr,km,mean_diff
std::string neighbors_csv(std::span<const std::pair<std::string, RankedSensors>> rankings);

/// group,n,rank_sum,mean_rank plus a trailing H/dof/p line.
std::string kwt_csv(const KwtResult& kwt, std::span<const std::string> names);
/// group_a,group_b,difference,lower,upper,p_adjusted,significant
std::string mct_csv(const MctResult& mct, std::span<const std::string> names);

enum class MetricKind { mae, rmse, mape };
std::string_view to_string(MetricKind kind) noexcept;

/// Self-contained SVG line chart of one metric against horizon, one line
/// per technique.
std::string metric_chart_svg(std::span<const MetricsReport> reports, MetricKind kind);

}  // namespace stsc

#pragma once

#include <span>
#include <string>
#include <vector>

#include "stsc/speed_data.hpp"
#include "stsc/time.hpp"

namespace stsc {

struct NeighborQuery {
  std::string target;
  TimePoint anchor{};
  double distance_km = 10.0;
  Minutes history{300};
  std::size_t neighbor_count = 10;

  void validate() const;
};

struct CandidateAttributes {
  std::string sensor_id;
  double correlation = 0.0;
  double km = 0.0;
  double mean_diff = 0.0;
};

/// Criterion weights and directions (+1 benefit, -1 cost).
struct TopsisSpec {
  std::vector<double> weights{1.0, 1.0, 1.0};
  std::vector<int> signs{+1, -1, -1};
};

struct TopsisResult {
  std::vector<std::size_t> order;  // alternatives, best first
  std::vector<double> closeness;   // per alternative, input order
};

struct RankedSensors {
  std::vector<CandidateAttributes> ranked;  // best first
  std::vector<double> closeness;            // aligned with `ranked`
  std::vector<std::string> selected;        // top min(m, candidates)
  bool shortfall = false;                   // fewer candidates than m
};

/// Sample Pearson correlation; 0 when either series is constant.
double pearson_corr(std::span<const double> a, std::span<const double> b);
double abs_mean_diff(std::span<const double> a, std::span<const double> b);

/// Vector-normalised TOPSIS over a row-major alternatives x criteria matrix.
/// Ties in closeness are broken by ascending `ids`.
TopsisResult topsis_rank(std::span<const double> matrix, std::size_t alternatives,
                         std::size_t criteria, const TopsisSpec& spec,
                         std::span<const std::string> ids);

/// Candidate filtering by distance, attribute computation over the history
/// window [anchor - history, anchor], TOPSIS ranking and top-m selection.
RankedSensors select_neighbors(const SpeedMatrix& matrix, const SensorNetwork& network,
                               const NeighborQuery& query, const TopsisSpec& spec = {});

}  // namespace stsc

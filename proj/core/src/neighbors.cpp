#include "stsc/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stsc/error.hpp"

namespace stsc {

void NeighborQuery::validate() const {
  if (!(distance_km > 0.0)) throw Error(Errc::config, "distance threshold must be positive");
  if (history <= Minutes{0} || history % kStep != Minutes{0})
    throw Error(Errc::config, "history window must be a positive multiple of 5 minutes");
  if (neighbor_count < 1) throw Error(Errc::config, "neighbor count must be >= 1");
}

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, std::size_t min) {
  if (a.size() != b.size())
    throw Error(Errc::dimension, "series lengths differ: " + std::to_string(a.size()) + " vs " +
                                     std::to_string(b.size()));
  if (a.size() < min)
    throw Error(Errc::dimension, "series needs at least " + std::to_string(min) + " values");
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double pearson_corr(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, 2);
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double abs_mean_diff(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, 1);
  return std::abs(mean(a) - mean(b));
}

TopsisResult topsis_rank(std::span<const double> matrix, std::size_t alternatives,
                         std::size_t criteria, const TopsisSpec& spec,
                         std::span<const std::string> ids) {
  if (alternatives < 1 || criteria < 1)
    throw Error(Errc::dimension, "TOPSIS needs at least one alternative and one criterion");
  if (matrix.size() != alternatives * criteria || ids.size() != alternatives)
    throw Error(Errc::dimension, "TOPSIS matrix size does not match alternatives x criteria");
  if (spec.weights.size() != criteria || spec.signs.size() != criteria)
    throw Error(Errc::dimension, "TOPSIS spec has " + std::to_string(spec.weights.size()) +
                                     " weights for " + std::to_string(criteria) + " criteria");
  for (int s : spec.signs)
    if (s != 1 && s != -1) throw Error(Errc::config, "TOPSIS signs must be +1 or -1");
  const double weight_sum = std::accumulate(spec.weights.begin(), spec.weights.end(), 0.0);
  if (!(weight_sum > 0.0)) throw Error(Errc::config, "TOPSIS weights must be positive");

  std::vector<double> v(matrix.begin(), matrix.end());
  for (std::size_t c = 0; c < criteria; ++c) {
    double norm = 0.0;
    for (std::size_t a = 0; a < alternatives; ++a) norm += v[a * criteria + c] * v[a * criteria + c];
    norm = std::sqrt(norm);
    const double w = spec.weights[c] / weight_sum;
    for (std::size_t a = 0; a < alternatives; ++a)
      v[a * criteria + c] = norm > 0.0 ? w * v[a * criteria + c] / norm : 0.0;
  }

  std::vector<double> best(criteria), worst(criteria);
  for (std::size_t c = 0; c < criteria; ++c) {
    double hi = v[c], lo = v[c];
    for (std::size_t a = 1; a < alternatives; ++a) {
      hi = std::max(hi, v[a * criteria + c]);
      lo = std::min(lo, v[a * criteria + c]);
    }
    best[c] = spec.signs[c] > 0 ? hi : lo;
    worst[c] = spec.signs[c] > 0 ? lo : hi;
  }

  TopsisResult result;
  result.closeness.resize(alternatives);
  for (std::size_t a = 0; a < alternatives; ++a) {
    double dplus = 0.0, dminus = 0.0;
    for (std::size_t c = 0; c < criteria; ++c) {
      const double x = v[a * criteria + c];
      dplus += (x - best[c]) * (x - best[c]);
      dminus += (x - worst[c]) * (x - worst[c]);
    }
    dplus = std::sqrt(dplus);
    dminus = std::sqrt(dminus);
    result.closeness[a] = dplus + dminus > 0.0 ? dminus / (dplus + dminus) : 0.5;
  }
  result.order.resize(alternatives);
  std::iota(result.order.begin(), result.order.end(), std::size_t{0});
  std::sort(result.order.begin(), result.order.end(), [&](std::size_t x, std::size_t y) {
    if (result.closeness[x] != result.closeness[y]) return result.closeness[x] > result.closeness[y];
    return ids[x] < ids[y];
  });
  return result;
}

RankedSensors select_neighbors(const SpeedMatrix& matrix, const SensorNetwork& network,
                               const NeighborQuery& query, const TopsisSpec& spec) {
  query.validate();
  const std::size_t p_col = matrix.sensor_index(query.target);
  const std::size_t p_net = network.index_of(query.target);

  const auto anchor_row = matrix.row_of(query.anchor);
  const auto steps = static_cast<std::size_t>(query.history / kStep);
  if (!anchor_row || *anchor_row % matrix.slots_per_day() < steps)
    throw Error(Errc::insufficient_history,
                "window ending " + format_timestamp(query.anchor) + " not covered on the same day");
  const std::size_t first_row = *anchor_row - steps;

  auto window = [&](std::size_t col) {
    std::vector<double> w(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
      w[i] = matrix.at(first_row + i, col);
      if (is_missing(w[i]))
        throw Error(Errc::insufficient_history,
                    "missing reading for " + matrix.sensors()[col] + " in the history window");
    }
    return w;
  };
  const std::vector<double> target = window(p_col);

  std::vector<CandidateAttributes> candidates;
  std::vector<std::string> ids;
  std::vector<double> attrs;
  for (std::size_t c = 0; c < matrix.sensor_count(); ++c) {
    const auto q_net = network.find(matrix.sensors()[c]);
    if (!q_net) continue;
    const double km = network.distance(p_net, *q_net);
    if (!(km < query.distance_km)) continue;
    const std::vector<double> series = c == p_col ? target : window(c);
    CandidateAttributes ca{matrix.sensors()[c], c == p_col ? 1.0 : pearson_corr(target, series),
                           km, abs_mean_diff(target, series)};
    attrs.insert(attrs.end(), {ca.correlation, ca.km, ca.mean_diff});
    ids.push_back(ca.sensor_id);
    candidates.push_back(std::move(ca));
  }

  const TopsisResult ranking = topsis_rank(attrs, candidates.size(), 3, spec, ids);
  RankedSensors out;
  for (std::size_t idx : ranking.order) {
    out.ranked.push_back(candidates[idx]);
    out.closeness.push_back(ranking.closeness[idx]);
  }
  const std::size_t take = std::min(query.neighbor_count, out.ranked.size());
  for (std::size_t i = 0; i < take; ++i) out.selected.push_back(out.ranked[i].sensor_id);
  out.shortfall = out.ranked.size() < query.neighbor_count;
  return out;
}

}  // namespace stsc

#include "stsc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "stsc/error.hpp"

namespace stsc {

std::vector<double> mid_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

KwtResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(Errc::empty_input, "Kruskal-Wallis needs at least two groups");
  std::vector<double> pooled;
  KwtResult r;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty())
      throw Error(Errc::empty_input, "Kruskal-Wallis group " + std::to_string(g) + " is empty");
    for (double v : groups[g])
      if (!std::isfinite(v)) throw Error(Errc::range, "Kruskal-Wallis values must be finite");
    pooled.insert(pooled.end(), groups[g].begin(), groups[g].end());
    r.sizes.push_back(groups[g].size());
  }
  const std::vector<double> ranks = mid_ranks(pooled);
  r.total = pooled.size();
  r.dof = groups.size() - 1;
  std::size_t k = 0;
  for (std::size_t n : r.sizes) {
    r.rank_sums.push_back(std::accumulate(ranks.begin() + static_cast<std::ptrdiff_t>(k),
                                          ranks.begin() + static_cast<std::ptrdiff_t>(k + n), 0.0));
    k += n;
  }

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<double>(j - i);
    r.tie_sum += t * t * t - t;
    i = j;
  }

  const auto n = static_cast<double>(r.total);
  const double tie_factor = n > 1 ? 1.0 - r.tie_sum / (n * n * n - n) : 0.0;
  if (tie_factor <= 0.0) {
    r.h = 0.0;
    r.p_value = 1.0;
    return r;
  }
  double s = 0.0;
  for (std::size_t g = 0; g < r.sizes.size(); ++g)
    s += r.rank_sums[g] * r.rank_sums[g] / static_cast<double>(r.sizes[g]);
  r.h = std::max(0.0, (12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0)) / tie_factor);
  r.p_value = std::clamp(boost::math::gamma_q(static_cast<double>(r.dof) / 2.0, r.h / 2.0), 0.0, 1.0);
  return r;
}

MctResult multiple_comparison(const KwtResult& kwt, double alpha) {
  if (kwt.sizes.size() < 2) throw Error(Errc::empty_input, "multiple comparison needs >= 2 groups");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::config, "alpha must lie in (0, 1)");
  const std::size_t groups = kwt.sizes.size();
  const double pairs = static_cast<double>(groups * (groups - 1) / 2);
  const boost::math::normal_distribution<double> normal;

  MctResult out;
  out.alpha = alpha;
  out.critical = boost::math::quantile(boost::math::complement(normal, alpha / (2.0 * pairs)));
  const auto n = static_cast<double>(kwt.total);
  const double variance =
      std::max(0.0, n * (n + 1.0) / 12.0 - (n > 1 ? kwt.tie_sum / (12.0 * (n - 1.0)) : 0.0));
  for (std::size_t i = 0; i < groups; ++i) {
    for (std::size_t j = i + 1; j < groups; ++j) {
      PairComparison c{i, j};
      c.difference = kwt.mean_rank(i) - kwt.mean_rank(j);
      const double se = std::sqrt(variance * (1.0 / static_cast<double>(kwt.sizes[i]) +
                                              1.0 / static_cast<double>(kwt.sizes[j])));
      c.lower = c.difference - out.critical * se;
      c.upper = c.difference + out.critical * se;
      if (se > 0.0) {
        c.z = c.difference / se;
        const double p = 2.0 * boost::math::cdf(boost::math::complement(normal, std::abs(c.z)));
        c.p_adjusted = std::min(1.0, p * pairs);
      }
      c.significant = c.lower > 0.0 || c.upper < 0.0;
      out.pairs.push_back(c);
    }
  }
  return out;
}

}  // namespace stsc

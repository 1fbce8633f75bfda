#pragma once

#include <vector>

namespace stsc {

struct KwtResult {
  double h = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  std::vector<double> rank_sums;
  std::vector<std::size_t> sizes;
  std::size_t total = 0;
  double tie_sum = 0.0;  // sum of t^3 - t over tied groups

  double mean_rank(std::size_t group) const { return rank_sums.at(group) / static_cast<double>(sizes.at(group)); }
};

/// Mid-ranks over the pooled sample, tie-corrected H, p from the chi-square
/// survival function with groups - 1 degrees of freedom. H = 0 when every
/// value is tied. Throws Errc::empty_input for < 2 groups or an empty group.
KwtResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Mid-ranks (1-based) of `values`, ties averaged.
std::vector<double> mid_ranks(const std::vector<double>& values);

struct PairComparison {
  std::size_t i = 0;
  std::size_t j = 0;
  double difference = 0.0;  // mean rank i - mean rank j
  double lower = 0.0;
  double upper = 0.0;
  double z = 0.0;
  double p_adjusted = 1.0;  // Bonferroni, capped at 1
  bool significant = false;
};

struct MctResult {
  double alpha = 0.05;
  double critical = 0.0;  // z quantile at 1 - alpha / (2 * pairs)
  std::vector<PairComparison> pairs;
};

/// Dunn's test on the mean ranks with Bonferroni adjustment.
MctResult multiple_comparison(const KwtResult& kwt, double alpha = 0.05);

}  // namespace stsc

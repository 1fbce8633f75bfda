#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "stsc/dataset.hpp"
#include "stsc/network.hpp"
#include "stsc/optim.hpp"
#include "stsc/speed_data.hpp"

namespace stsc {

enum class NaiveKind { persistence, historical_average };

/// Reference forecasts straight from the speed matrix: persistence repeats
/// speed(p, t0); the historical average takes the mean of the same time of
/// day on each lag day. Throws Errc::insufficient_history.
std::vector<double> baseline_naive(NaiveKind kind, const SpeedMatrix& matrix,
                                   std::string_view target, TimePoint anchor,
                                   std::size_t horizon = 12,
                                   std::span<const std::size_t> lag_days = {});

/// The same forecasts read off the sample tensors (channel 1's last row,
/// and the centred lag channels). Returns (N, horizon) in mph.
Tensor naive_predictions(NaiveKind kind, const SampleSet& samples,
                         const NormalizationParams& params);

/// Flattened input vectors with their target vectors.
struct TrainPairs {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<double> inputs;
  std::vector<double> targets;

  std::size_t size() const { return input_dim ? inputs.size() / input_dim : 0; }
  std::span<const double> input(std::size_t i) const { return {inputs.data() + i * input_dim, input_dim}; }
  std::span<const double> target(std::size_t i) const { return {targets.data() + i * output_dim, output_dim}; }
  void push(std::span<const double> x, std::span<const double> y);
};

/// Target-sensor history X[:, 0, 0] paired with Y, both normalised.
TrainPairs history_pairs(const SampleSet& samples);

/// Inverse-distance-weighted mean of the targets of the k nearest inputs
/// (Euclidean; weight 1 / (d + 1e-9); ties by training index).
std::vector<double> baseline_knn(const TrainPairs& train, std::span<const double> query,
                                 std::size_t k);
/// kNN over every input of `queries`, (N, output_dim).
Tensor knn_predictions(const TrainPairs& train, const TrainPairs& queries, std::size_t k,
                       std::size_t threads = 1);

/// Input standardiser (a batch-norm layer), then dense layers with sigmoid
/// hidden activations and a linear output.
Network build_mlp(std::size_t input_dim, std::span<const std::size_t> hidden,
                  std::size_t output_dim);
/// Fits the standardiser to the training inputs and freezes it, then trains
/// the dense layers.
std::vector<double> train_mlp(Network& mlp, const TrainPairs& train, const TrainingConfig& config,
                              const FitOptions& options = {});
/// (N, output_dim) in the pairs' (normalised) units.
Tensor mlp_predictions(Network& mlp, const TrainPairs& queries);

}  // namespace stsc

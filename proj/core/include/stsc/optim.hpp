#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stsc/network.hpp"
#include "stsc/tensor.hpp"

namespace stsc {

struct TrainingConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 128;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dropout_prob = 0.2;
  std::size_t epochs = 10;
  std::uint64_t rng_seed = 42;

  void validate() const;
};

/// Mean of squared differences over all elements.
double mse_loss(const Tensor& predicted, const Tensor& target);
/// dLoss/dPredicted for mse_loss.
Tensor mse_grad(const Tensor& predicted, const Tensor& target);

/// Uniform Glorot initialisation in +-sqrt(6 / (fan_in + fan_out)).
double xavier_limit(std::size_t fan_in, std::size_t fan_out);
Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, Shape shape, Rng& rng);
inline Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return xavier_init(fan_in, fan_out, {fan_out, fan_in}, rng);
}

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// Bias-corrected Adam over a fixed parameter list.
class Adam {
 public:
  explicit Adam(const TrainingConfig& config) : config_(config) {}

  /// Applies one update to every `params[i].value` using `params[i].grad`.
  /// The list must keep the same order and shapes across calls.
  void step(std::span<const StateRef> params);
  const AdamState& state() const noexcept { return state_; }

 private:
  TrainingConfig config_;
  AdamState state_;
};

/// Produces (input batch, target batch) for a set of sample indices.
using BatchFn = std::function<std::pair<Tensor, Tensor>(std::span<const std::size_t>)>;

struct FitOptions {
  std::ostream* log = nullptr;  // one line per epoch when set
  std::string tag = "train";
};

/// Mini-batch Adam on MSE for `config.epochs` epochs with a seeded shuffle.
/// Returns the mean training loss per epoch; throws Errc::divergence on a
/// non-finite loss.
std::vector<double> fit(Network& net, std::size_t sample_count, const BatchFn& batches,
                        const TrainingConfig& config, const FitOptions& options = {});

/// Runs `net` in eval mode over `count` samples in chunks of `batch_size`
/// and returns the stacked outputs.
Tensor predict_batched(Network& net, std::size_t count,
                       const std::function<Tensor(std::span<const std::size_t>)>& inputs,
                       std::size_t batch_size = 256);

}  // namespace stsc

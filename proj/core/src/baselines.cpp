#include "stsc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stsc/error.hpp"
#include "stsc/parallel.hpp"

namespace stsc {

namespace {

constexpr std::size_t kDefaultLags[] = {1, 7, 14};
constexpr double kKnnEpsilon = 1e-9;

double history_cell(const SpeedMatrix& matrix, std::size_t row, std::size_t col) {
  const double v = matrix.at(row, col);
  if (is_missing(v))
    throw Error(Errc::insufficient_history, "missing reading for " + matrix.sensors()[col] +
                                                " at " + format_timestamp(matrix.time(row)));
  return v;
}

}  // namespace

std::vector<double> baseline_naive(NaiveKind kind, const SpeedMatrix& matrix,
                                   std::string_view target, TimePoint anchor, std::size_t horizon,
                                   std::span<const std::size_t> lag_days) {
  if (lag_days.empty()) lag_days = kDefaultLags;
  const std::size_t col = matrix.sensor_index(target);
  const auto row = matrix.row_of(anchor);
  if (!row)
    throw Error(Errc::insufficient_history, format_timestamp(anchor) + " is not covered by the data");
  const std::size_t slots = matrix.slots_per_day();
  const std::size_t day = *row / slots, slot = *row % slots;

  std::vector<double> out(horizon);
  if (kind == NaiveKind::persistence) {
    std::fill(out.begin(), out.end(), history_cell(matrix, *row, col));
    return out;
  }
  if (slot + horizon >= slots)
    throw Error(Errc::insufficient_history, "horizon runs past the end of the day");
  for (std::size_t lag : lag_days)
    if (lag > day)
      throw Error(Errc::insufficient_history,
                  "day " + format_date(day_of(anchor) - std::chrono::days(lag)) + " is not covered");
  for (std::size_t i = 1; i <= horizon; ++i) {
    double sum = 0.0;
    for (std::size_t lag : lag_days) sum += history_cell(matrix, matrix.row(day - lag, slot + i), col);
    out[i - 1] = sum / static_cast<double>(lag_days.size());
  }
  return out;
}

Tensor naive_predictions(NaiveKind kind, const SampleSet& samples,
                         const NormalizationParams& params) {
  const Shape& xs = samples.x_shape();
  const std::size_t steps = xs[0], width = xs[1], channels = xs[2];
  const std::size_t horizon = samples.horizon();
  if (kind == NaiveKind::historical_average && (channels < 2 || steps / 2 + horizon > steps))
    throw Error(Errc::insufficient_history, "samples carry no lag-day channels covering the horizon");
  auto at = [&](std::span<const float> x, std::size_t h, std::size_t c) {
    return static_cast<double>(x[(h * width) * channels + c]);
  };
  Tensor out({samples.size(), horizon});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto x = samples.x_values(i);
    for (std::size_t k = 0; k < horizon; ++k) {
      double v;
      if (kind == NaiveKind::persistence) {
        v = params.denormalize(at(x, steps - 1, 0));
      } else {
        // Lag row steps/2 - 1 is t0 itself, so t0 + 5(k+1) is one further on.
        double sum = 0.0;
        for (std::size_t c = 1; c < channels; ++c)
          sum += params.denormalize(at(x, steps / 2 + k, c));
        v = sum / static_cast<double>(channels - 1);
      }
      out[i * horizon + k] = v;
    }
  }
  return out;
}

void TrainPairs::push(std::span<const double> x, std::span<const double> y) {
  if (inputs.empty() && targets.empty()) {
    input_dim = x.size();
    output_dim = y.size();
  }
  if (x.size() != input_dim || y.size() != output_dim || x.empty() || y.empty())
    throw Error(Errc::dimension, "training pair does not match earlier pairs");
  inputs.insert(inputs.end(), x.begin(), x.end());
  targets.insert(targets.end(), y.begin(), y.end());
}

TrainPairs history_pairs(const SampleSet& samples) {
  TrainPairs out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.push(samples.target_history(i), samples.y_values(i));
  return out;
}

std::vector<double> baseline_knn(const TrainPairs& train, std::span<const double> query,
                                 std::size_t k) {
  const std::size_t n = train.size();
  if (n == 0) throw Error(Errc::empty_dataset, "kNN needs training pairs");
  if (k < 1 || k > n)
    throw Error(Errc::config, "k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  if (query.size() != train.input_dim)
    throw Error(Errc::dimension, "kNN query has " + std::to_string(query.size()) +
                                     " values, inputs have " + std::to_string(train.input_dim));

  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = train.input(i);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - query[j]) * (x[j] - query[j]);
    dist[i] = {std::sqrt(s), i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  std::vector<double> out(train.output_dim, 0.0);
  double weight_sum = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    const double w = 1.0 / (dist[r].first + kKnnEpsilon);
    const auto y = train.target(dist[r].second);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * y[j];
    weight_sum += w;
  }
  for (auto& v : out) v /= weight_sum;
  return out;
}

Tensor knn_predictions(const TrainPairs& train, const TrainPairs& queries, std::size_t k,
                       std::size_t threads) {
  if (queries.size() == 0) throw Error(Errc::empty_input, "kNN over zero queries");
  Tensor out({queries.size(), train.output_dim});
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    const auto y = baseline_knn(train, queries.input(i), k);
    std::copy(y.begin(), y.end(), out.raw() + i * train.output_dim);
  });
  return out;
}

Network build_mlp(std::size_t input_dim, std::span<const std::size_t> hidden,
                  std::size_t output_dim) {
  if (input_dim == 0 || output_dim == 0 || std::ranges::count(hidden, 0u))
    throw Error(Errc::config, "MLP layer sizes must be >= 1");
  Network net;
  net.add(LayerSpec::batch_norm(input_dim));  // input standardiser, fitted by train_mlp
  std::size_t in = input_dim;
  for (std::size_t h : hidden) {
    net.add(LayerSpec::dense(in, h)).add(LayerSpec::activation_layer(Activation::sigmoid));
    in = h;
  }
  net.add(LayerSpec::dense(in, output_dim));
  return net;
}

namespace {

Tensor rows(const std::vector<double>& data, std::size_t dim, std::span<const std::size_t> idx) {
  Tensor out({idx.size(), 1, 1, dim});
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(idx[r] * dim), dim, out.raw() + r * dim);
  return out;
}

}  // namespace

std::vector<double> train_mlp(Network& mlp, const TrainPairs& train, const TrainingConfig& config,
                              const FitOptions& options) {
  if (train.size() == 0) throw Error(Errc::empty_dataset, "MLP training set is empty");
  auto* scaler = dynamic_cast<BatchNorm*>(&mlp.at(0));
  if (!scaler || scaler->running_mean().size() != train.input_dim)
    throw Error(Errc::config, "MLP must start with an input standardiser of width " +
                                  std::to_string(train.input_dim));
  // Per-feature z-scores from the training inputs, then frozen.
  const std::size_t n = train.size(), d = train.input_dim;
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += train.inputs[i * d + j];
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double e = train.inputs[i * d + j] - mean[j];
      var[j] += e * e;
    }
  for (std::size_t j = 0; j < d; ++j) {
    scaler->running_mean()[j] = mean[j];
    scaler->running_var()[j] = var[j] / static_cast<double>(n);
  }
  scaler->scale().fill(1.0);
  scaler->shift().fill(0.0);
  scaler->set_frozen(true);

  BatchFn batches = [&](std::span<const std::size_t> idx) {
    return std::pair{rows(train.inputs, train.input_dim, idx),
                     rows(train.targets, train.output_dim, idx)};
  };
  return fit(mlp, train.size(), batches, config, options);
}

Tensor mlp_predictions(Network& mlp, const TrainPairs& queries) {
  Tensor out = predict_batched(mlp, queries.size(), [&](std::span<const std::size_t> idx) {
    return rows(queries.inputs, queries.input_dim, idx);
  });
  return std::move(out).reshaped({queries.size(), out.size() / queries.size()});
}

}  // namespace stsc

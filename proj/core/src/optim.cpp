#include "stsc/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "stsc/error.hpp"

namespace stsc {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(Errc::config, "learning rate must be positive");
  if (batch_size < 1) throw Error(Errc::config, "batch size must be >= 1");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw Error(Errc::config, "Adam betas must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw Error(Errc::config, "Adam epsilon must be positive");
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0))
    throw Error(Errc::config, "dropout probability must lie in [0, 1)");
}

double mse_loss(const Tensor& predicted, const Tensor& target) {
  if (predicted.size() != target.size() || predicted.size() == 0)
    throw Error(Errc::dimension, "mse: " + shape_str(predicted.shape()) + " vs " +
                                     shape_str(target.shape()));
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predicted.size());
}

Tensor mse_grad(const Tensor& predicted, const Tensor& target) {
  if (predicted.size() != target.size())
    throw Error(Errc::dimension, "mse: " + shape_str(predicted.shape()) + " vs " +
                                     shape_str(target.shape()));
  Tensor g(predicted.shape());
  const double scale = 2.0 / static_cast<double>(predicted.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (predicted[i] - target[i]);
  return g;
}

double xavier_limit(std::size_t fan_in, std::size_t fan_out) {
  if (fan_in < 1 || fan_out < 1) throw Error(Errc::config, "fan-in and fan-out must be >= 1");
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, Shape shape, Rng& rng) {
  const double limit = xavier_limit(fan_in, fan_out);
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

void Adam::step(std::span<const StateRef> params) {
  if (state_.step == 0) {
    state_.first_moment.clear();
    state_.second_moment.clear();
    for (const auto& p : params) {
      state_.first_moment.emplace_back(p.value->shape());
      state_.second_moment.emplace_back(p.value->shape());
    }
  }
  if (params.size() != state_.first_moment.size())
    throw Error(Errc::state, "Adam: parameter list changed between steps");

  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& value = *params[k].value;
    const Tensor& grad = *params[k].grad;
    Tensor& m = state_.first_moment[k];
    Tensor& v = state_.second_moment[k];
    if (grad.shape() != value.shape() || m.shape() != value.shape())
      throw Error(Errc::dimension, "Adam: shape mismatch for " + params[k].name);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

std::vector<double> fit(Network& net, std::size_t sample_count, const BatchFn& batches,
                        const TrainingConfig& config, const FitOptions& options) {
  config.validate();
  if (sample_count == 0) throw Error(Errc::empty_dataset, "no training samples");
  auto params = net.parameters();
  Adam adam(config);
  Rng shuffle_rng(config.rng_seed);
  net.reseed_dropout(config.rng_seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> curve;
  curve.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < sample_count;) {
      std::size_t end = std::min(begin + config.batch_size, sample_count);
      // Never leave a single-sample tail batch (batch-norm needs two).
      if (sample_count - end == 1) ++end;
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      auto [input, target] = batches(idx);
      net.zero_grad();
      const Tensor output = net.forward(input, Mode::train);
      const double loss = mse_loss(output, target);
      if (!std::isfinite(loss))
        throw Error(Errc::divergence, options.tag + ": non-finite loss at epoch " +
                                          std::to_string(epoch + 1));
      net.backward_params(mse_grad(output, target));
      adam.step(params);
      loss_sum += loss * static_cast<double>(idx.size());
      seen += idx.size();
      begin = end;
    }
    curve.push_back(loss_sum / static_cast<double>(seen));
    if (options.log)
      *options.log << options.tag << " epoch " << (epoch + 1) << "/" << config.epochs
                   << " loss " << curve.back() << '\n';
  }
  return curve;
}

Tensor predict_batched(Network& net, std::size_t count,
                       const std::function<Tensor(std::span<const std::size_t>)>& inputs,
                       std::size_t batch_size) {
  if (count == 0) throw Error(Errc::empty_input, "predict over zero samples");
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> data;
  Shape inner;
  for (std::size_t begin = 0; begin < count; begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, count);
    Tensor out = net.forward(inputs({idx.data() + begin, end - begin}), Mode::eval);
    inner.assign(out.shape().begin() + 1, out.shape().end());
    data.insert(data.end(), out.values().begin(), out.values().end());
  }
  Shape shape{count};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace stsc

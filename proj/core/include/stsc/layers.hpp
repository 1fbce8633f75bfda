#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "stsc/error.hpp"
#include "stsc/tensor.hpp"

namespace stsc {

enum class LayerKind {
  conv,
  transposed_conv,
  batch_norm,
  activation,
  avg_pool,
  upsample,
  dropout,
  dense,
  flatten,
  residual_block,
  sequential,
};

enum class Activation { tanh, relu, sigmoid, linear };

std::string_view to_string(LayerKind kind) noexcept;
std::string_view to_string(Activation act) noexcept;
LayerKind parse_layer_kind(std::string_view name);
Activation parse_activation(std::string_view name);

struct Extent {
  std::size_t h = 1;
  std::size_t w = 1;
  friend bool operator==(const Extent&, const Extent&) = default;
};

/// Static description of one layer. Fields that do not apply to a kind are
/// ignored; `kernel` doubles as the scale factor for upsample and the window
/// for avg-pool. Dense layers emit `out_hw.h x out_hw.w x channels_out`.
struct LayerSpec {
  LayerKind kind = LayerKind::sequential;
  Extent kernel{1, 1};
  Extent stride{1, 1};
  Extent padding{0, 0};
  Extent output_padding{0, 0};
  std::size_t channels_in = 0;
  std::size_t channels_out = 0;
  Activation activation = Activation::linear;
  double dropout_prob = 0.0;
  Extent out_hw{1, 1};

  /// Throws Errc::config on kernel/stride < 1 or output_padding >= stride.
  void validate() const;

  static LayerSpec conv(std::size_t cin, std::size_t cout, Extent kernel, Extent stride,
                        Extent padding);
  static LayerSpec transposed_conv(std::size_t cin, std::size_t cout, Extent kernel, Extent stride,
                                   Extent padding, Extent output_padding);
  static LayerSpec batch_norm(std::size_t channels);
  static LayerSpec activation_layer(Activation act);
  static LayerSpec avg_pool(Extent window);
  static LayerSpec upsample(Extent scale);
  static LayerSpec dropout(double prob);
  static LayerSpec dense(std::size_t in, std::size_t out, Extent out_hw = {1, 1});
  static LayerSpec flatten();
  static LayerSpec residual_block(std::size_t channels);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class Mode { train, eval };

/// Handle to one piece of layer state. `grad` is null for non-trainable
/// buffers such as batch-norm running statistics.
struct StateRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
  bool frozen = false;
};

class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const noexcept { return spec_; }
  LayerKind kind() const noexcept { return spec_.kind; }

  /// Per-sample output shape (H, W, C) for a per-sample input shape.
  virtual Shape output_shape(const Shape& in) const = 0;
  /// `x` is a batch tensor (N, H, W, C).
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  /// Accumulates parameter gradients and returns dLoss/dInput. Requires a
  /// preceding forward; throws Errc::state otherwise.
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual void initialize(Rng& /*rng*/) {}
  virtual void collect_state(const std::string& /*prefix*/, std::vector<StateRef>& /*out*/) {}
  virtual void zero_grad() {}
  virtual void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const noexcept { return frozen_; }
  /// True if any parameter below this layer receives updates.
  virtual bool trainable() const { return false; }
  virtual std::unique_ptr<Layer> clone() const = 0;

 protected:
  LayerSpec spec_;
  bool frozen_ = false;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

// Output-size formulas shared by the layers and the model builders.
constexpr std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                    std::size_t pad) {
  if (in + 2 * pad < kernel)
    throw Error(Errc::dimension, "kernel " + std::to_string(kernel) + " larger than padded input " +
                                     std::to_string(in + 2 * pad));
  return (in + 2 * pad - kernel) / stride + 1;
}

constexpr std::size_t transposed_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                          std::size_t pad, std::size_t out_pad) {
  const std::size_t full = (in - 1) * stride + kernel + out_pad;
  if (full <= 2 * pad) throw Error(Errc::dimension, "transposed convolution output would be empty");
  return full - 2 * pad;
}

class Conv2d final : public Layer {
 public:
  explicit Conv2d(const LayerSpec& spec);
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void initialize(Rng& rng) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  void zero_grad() override;
  bool trainable() const override { return !frozen_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

  Tensor& weight() noexcept { return weight_; }  // (kh, kw, cin, cout)
  Tensor& bias() noexcept { return bias_; }

 private:
  Tensor weight_, bias_, weight_grad_, bias_grad_;
  Tensor cols_;
  Shape in_shape_;
  bool cached_ = false;
};

class ConvTranspose2d final : public Layer {
 public:
  explicit ConvTranspose2d(const LayerSpec& spec);
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void initialize(Rng& rng) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  void zero_grad() override;
  bool trainable() const override { return !frozen_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvTranspose2d>(*this); }

  Tensor& weight() noexcept { return weight_; }  // (cin, kh, kw, cout)
  Tensor& bias() noexcept { return bias_; }

 private:
  Tensor weight_, bias_, weight_grad_, bias_grad_;
  Tensor input_;
  bool cached_ = false;
};

/// Per-channel normalization over batch and spatial axes. Frozen instances
/// normalize with running statistics and never update them.
class BatchNorm final : public Layer {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  explicit BatchNorm(const LayerSpec& spec);
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void initialize(Rng& rng) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  void zero_grad() override;
  bool trainable() const override { return !frozen_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }

  Tensor& scale() noexcept { return gamma_; }
  Tensor& shift() noexcept { return beta_; }
  Tensor& running_mean() noexcept { return running_mean_; }
  Tensor& running_var() noexcept { return running_var_; }

 private:
  Tensor gamma_, beta_, gamma_grad_, beta_grad_, running_mean_, running_var_;
  Tensor xhat_;
  std::vector<double> inv_std_;
  bool batch_stats_ = false;
  bool cached_ = false;
};

class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(const LayerSpec& spec) : Layer(spec) {}
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ActivationLayer>(*this); }

 private:
  Tensor input_, output_;
  bool cached_ = false;
};

/// Elementwise activation on a bare tensor.
Tensor pointwise_activation(const Tensor& x, Activation act);

class AvgPool2d final : public Layer {
 public:
  explicit AvgPool2d(const LayerSpec& spec);
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<AvgPool2d>(*this); }

 private:
  Shape in_shape_;
  bool cached_ = false;
};

/// Nearest-neighbour repetition by `kernel` along H and W.
class Upsample2d final : public Layer {
 public:
  explicit Upsample2d(const LayerSpec& spec);
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Upsample2d>(*this); }

 private:
  Shape in_shape_;
  bool cached_ = false;
};

/// Inverted dropout: train mode keeps entries with probability 1-p and
/// scales them by 1/(1-p); eval mode is the identity.
class Dropout final : public Layer {
 public:
  explicit Dropout(const LayerSpec& spec);
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void initialize(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

  void reseed(std::uint64_t seed) { rng_.seed(seed); }
  /// Reuse the previous mask on subsequent train-mode forwards (gradient checks).
  void hold_mask(bool hold) noexcept { hold_mask_ = hold; }

 private:
  Rng rng_{0};
  Tensor mask_;
  bool hold_mask_ = false;
  bool cached_ = false;
};

class Dense final : public Layer {
 public:
  explicit Dense(const LayerSpec& spec);
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void initialize(Rng& rng) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  void zero_grad() override;
  bool trainable() const override { return !frozen_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  Tensor& weight() noexcept { return weight_; }  // (out, in)
  Tensor& bias() noexcept { return bias_; }

 private:
  Tensor weight_, bias_, weight_grad_, bias_grad_;
  Tensor input_;
  Shape in_shape_;
  bool cached_ = false;
};

class Flatten final : public Layer {
 public:
  explicit Flatten(const LayerSpec& spec) : Layer(spec) {}
  Shape output_shape(const Shape& in) const override { return {1, 1, shape_size(in)}; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  Shape in_shape_;
  bool cached_ = false;
};

/// relu(bn2(conv2(relu(bn1(conv1(x))))) + x) with 3x3, stride 1, pad 1 convs.
class ResidualBlock final : public Layer {
 public:
  explicit ResidualBlock(const LayerSpec& spec);
  ResidualBlock(const ResidualBlock& other);
  ResidualBlock& operator=(const ResidualBlock&) = delete;

  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void initialize(Rng& rng) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  void zero_grad() override;
  void set_frozen(bool frozen) override;
  bool trainable() const override { return !frozen_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ResidualBlock>(*this); }

  Layer& part(std::size_t i) { return *parts_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> parts_;  // conv1, bn1, relu, conv2, bn2
  Tensor output_;
  bool cached_ = false;
};

}  // namespace stsc

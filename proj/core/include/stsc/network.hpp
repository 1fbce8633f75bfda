#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stsc/layers.hpp"

namespace stsc {

/// Ordered stack of named layers. A Network is itself a Layer, so encoders,
/// decoders and the latent mapping nest inside a cross-connected network.
class Network final : public Layer {
 public:
  struct Entry {
    std::string name;
    std::unique_ptr<Layer> layer;
  };

  Network();
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  Network& add(std::string name, std::unique_ptr<Layer> layer);
  Network& add(const LayerSpec& spec);
  Network& add(std::string name, Network child);

  std::size_t size() const noexcept { return entries_.size(); }
  std::span<const Entry> entries() const noexcept { return entries_; }
  Layer& at(std::size_t index) { return *entries_.at(index).layer; }
  const Layer& at(std::size_t index) const { return *entries_.at(index).layer; }
  Layer& at(std::string_view name);
  Network& child(std::string_view name);
  const Network& child(std::string_view name) const;

  Shape output_shape(const Shape& in) const override;
  /// Per-layer output shapes, starting with `in`.
  std::vector<Shape> trace(const Shape& in) const;

  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  /// Backward pass that stops below the first layer owning trainable
  /// parameters; used when a frozen prefix needs no input gradient.
  void backward_params(const Tensor& grad_out);

  void initialize(Rng& rng) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  void zero_grad() override;
  void set_frozen(bool frozen) override;
  bool trainable() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Network>(*this); }

  /// All state (parameters and buffers) with dotted path names.
  std::vector<StateRef> state();
  /// Trainable, unfrozen parameters only.
  std::vector<StateRef> parameters();

  /// Reseeds every dropout layer from `seed` in traversal order.
  void reseed_dropout(std::uint64_t seed);
  void hold_dropout_masks(bool hold);

 private:
  std::vector<Entry> entries_;
};

}  // namespace stsc

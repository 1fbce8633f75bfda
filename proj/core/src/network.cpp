#include "stsc/network.hpp"

#include <algorithm>

#include "stsc/error.hpp"

namespace stsc {

namespace {

LayerSpec sequential_spec() {
  LayerSpec s;
  s.kind = LayerKind::sequential;
  return s;
}

}  // namespace

Network::Network() : Layer(sequential_spec()) {}

Network::Network(const Network& other) : Layer(other) {
  entries_.reserve(other.entries_.size());
  for (const auto& e : other.entries_) entries_.push_back({e.name, e.layer->clone()});
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Network& Network::add(std::string name, std::unique_ptr<Layer> layer) {
  for (const auto& e : entries_)
    if (e.name == name) throw Error(Errc::config, "duplicate layer name '" + name + "'");
  entries_.push_back({std::move(name), std::move(layer)});
  return *this;
}

Network& Network::add(const LayerSpec& spec) {
  return add(std::to_string(entries_.size()), make_layer(spec));
}

Network& Network::add(std::string name, Network child) {
  return add(std::move(name), std::make_unique<Network>(std::move(child)));
}

Layer& Network::at(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return *e.layer;
  throw Error(Errc::not_found, "no layer named '" + std::string(name) + "'");
}

Network& Network::child(std::string_view name) {
  auto* net = dynamic_cast<Network*>(&at(name));
  if (!net) throw Error(Errc::config, "layer '" + std::string(name) + "' is not a network");
  return *net;
}

const Network& Network::child(std::string_view name) const {
  return const_cast<Network*>(this)->child(name);
}

Shape Network::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& e : entries_) s = e.layer->output_shape(s);
  return s;
}

std::vector<Shape> Network::trace(const Shape& in) const {
  std::vector<Shape> shapes{in};
  for (const auto& e : entries_) shapes.push_back(e.layer->output_shape(shapes.back()));
  return shapes;
}

Tensor Network::forward(const Tensor& x, Mode mode) {
  Tensor h = x;
  for (auto& e : entries_) h = e.layer->forward(h, mode);
  return h;
}

Tensor Network::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) g = it->layer->backward(g);
  return g;
}

void Network::backward_params(const Tensor& grad_out) {
  auto first = std::find_if(entries_.begin(), entries_.end(),
                            [](const Entry& e) { return e.layer->trainable(); });
  if (first == entries_.end()) return;
  const auto stop = static_cast<std::size_t>(first - entries_.begin());
  Tensor g = grad_out;
  for (std::size_t i = entries_.size(); i-- > stop;) {
    auto* sub = dynamic_cast<Network*>(entries_[i].layer.get());
    if (i == stop && sub) {
      sub->backward_params(g);
      return;
    }
    g = entries_[i].layer->backward(g);
  }
}

void Network::initialize(Rng& rng) {
  for (auto& e : entries_) e.layer->initialize(rng);
}

void Network::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  for (auto& e : entries_) e.layer->collect_state(prefix + e.name + ".", out);
}

void Network::zero_grad() {
  for (auto& e : entries_) e.layer->zero_grad();
}

void Network::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& e : entries_) e.layer->set_frozen(frozen);
}

bool Network::trainable() const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [](const Entry& e) { return e.layer->trainable(); });
}

std::vector<StateRef> Network::state() {
  std::vector<StateRef> out;
  collect_state("", out);
  return out;
}

std::vector<StateRef> Network::parameters() {
  auto all = state();
  std::erase_if(all, [](const StateRef& r) { return r.grad == nullptr || r.frozen; });
  return all;
}

namespace {

template <typename Fn>
void for_each_dropout(Layer& layer, Fn&& fn) {
  if (auto* d = dynamic_cast<Dropout*>(&layer)) {
    fn(*d);
  } else if (auto* net = dynamic_cast<Network*>(&layer)) {
    for (std::size_t i = 0; i < net->size(); ++i) for_each_dropout(net->at(i), fn);
  }
}

}  // namespace

void Network::reseed_dropout(std::uint64_t seed) {
  Rng rng(seed);
  for_each_dropout(*this, [&](Dropout& d) { d.reseed(rng()); });
}

void Network::hold_dropout_masks(bool hold) {
  for_each_dropout(*this, [&](Dropout& d) { d.hold_mask(hold); });
}

}  // namespace stsc

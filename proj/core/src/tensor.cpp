#include "stsc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "stsc/error.hpp"

namespace stsc {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::dimension: return "dimension error";
    case Errc::config: return "config error";
    case Errc::batch_too_small: return "batch too small";
    case Errc::state: return "state error";
    case Errc::parse: return "parse error";
    case Errc::duplicate: return "duplicate error";
    case Errc::range: return "range error";
    case Errc::not_found: return "not found";
    case Errc::insufficient_history: return "insufficient history";
    case Errc::degenerate_range: return "degenerate range";
    case Errc::empty_dataset: return "empty dataset";
    case Errc::empty_input: return "empty input";
    case Errc::divergence: return "divergence";
    case Errc::version_mismatch: return "version mismatch";
    case Errc::truncated: return "truncated";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::io: return "io error";
  }
  return "error";
}

std::size_t shape_size(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw Error(Errc::dimension, "zero-sized axis in " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, std::span<const double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_size(shape_) != data_.size())
    throw Error(Errc::dimension, "shape " + shape_str(shape_) + " does not hold " +
                                     std::to_string(data_.size()) + " values");
}

Tensor Tensor::from(std::initializer_list<std::size_t> shape,
                    std::initializer_list<double> values) {
  return Tensor(Shape(shape), std::span<const double>(values.begin(), values.size()));
}

double& Tensor::at(std::size_t h, std::size_t w, std::size_t c) {
  return data_[(h * shape_[1] + w) * shape_[2] + c];
}
double Tensor::at(std::size_t h, std::size_t w, std::size_t c) const {
  return data_[(h * shape_[1] + w) * shape_[2] + c];
}
double& Tensor::at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
  return data_[((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
}
double Tensor::at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
  return data_[((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape_size(shape) != data_.size())
    throw Error(Errc::dimension, "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  shape_ = std::move(shape);
  return std::move(*this);
}

void Tensor::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor stack(std::span<const Tensor> samples) {
  if (samples.empty()) throw Error(Errc::empty_input, "stack of zero samples");
  const Shape& inner = samples.front().shape();
  Shape shape{samples.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out(std::move(shape));
  double* dst = out.raw();
  for (const auto& s : samples) {
    if (s.shape() != inner)
      throw Error(Errc::dimension, "stack: " + shape_str(s.shape()) + " vs " + shape_str(inner));
    dst = std::copy(s.values().begin(), s.values().end(), dst);
  }
  return out;
}

Tensor unstack(const Tensor& batch, std::size_t index) {
  if (batch.rank() < 2 || index >= batch.dim(0))
    throw Error(Errc::dimension, "unstack index out of range");
  Shape inner(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t n = shape_size(inner);
  auto first = batch.values().begin() + static_cast<std::ptrdiff_t>(index * n);
  return Tensor(std::move(inner), std::span<const double>(&*first, n));
}

}  // namespace stsc

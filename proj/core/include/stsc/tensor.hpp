#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace stsc {

using Shape = std::vector<std::size_t>;
using Rng = std::mt19937_64;

/// 64-byte aligned storage so vectorised reductions always split the data the
/// same way, which keeps results bitwise reproducible across runs.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Batched image tensors are laid out
/// NHWC; a single sample is H x W x C.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::span<const double> data);

  static Tensor from(std::initializer_list<std::size_t> shape,
                     std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const Buffer& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Index a rank-3 (H, W, C) or rank-4 (N, H, W, C) tensor.
  double& at(std::size_t h, std::size_t w, std::size_t c);
  double at(std::size_t h, std::size_t w, std::size_t c) const;
  double& at(std::size_t n, std::size_t h, std::size_t w, std::size_t c);
  double at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const;

  /// Same data, new shape; throws Errc::dimension if element counts differ.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  void fill(double value) noexcept;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  Buffer data_;
};

/// Stacks equally shaped samples along a new leading batch axis.
Tensor stack(std::span<const Tensor> samples);

/// Extracts sample `index` of a batch tensor, dropping the batch axis.
Tensor unstack(const Tensor& batch, std::size_t index);

}  // namespace stsc

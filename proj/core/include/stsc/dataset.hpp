#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stsc/neighbors.hpp"
#include "stsc/speed_data.hpp"
#include "stsc/tensor.hpp"

namespace stsc {

/// Min-max scaling to [0, 1] with parameters fitted on training data.
struct NormalizationParams {
  double min = 0.0;
  double max = 1.0;

  /// Throws Errc::degenerate_range unless min < max (both finite).
  void validate() const;
  double normalize(double z) const;
  /// normalize() clamped to [0, 1], for values outside the fitted range.
  double normalize_clamped(double z) const;
  double denormalize(double z) const;
  Tensor normalize(const Tensor& t) const;
  Tensor denormalize(const Tensor& t) const;

  friend bool operator==(const NormalizationParams&, const NormalizationParams&) = default;
};

/// Global min and max over `values`; throws Errc::degenerate_range when
/// they coincide and Errc::empty_input when there are none.
NormalizationParams fit_normalization(std::span<const double> values);

struct DatasetConfig {
  double distance_km = 10.0;
  Minutes history{300};
  std::size_t neighbor_count = 10;
  std::size_t horizon_steps = 12;
  double train_fraction = 0.70;
  std::size_t anchor_stride = 1;  // every n-th valid anchor of a day
  Minutes neighbor_cache{0};      // 0: rank neighbours at every anchor
  std::vector<std::size_t> lag_days{1, 7, 14};
  std::size_t threads = 1;

  void validate() const;
  std::size_t window_steps() const { return static_cast<std::size_t>(history / kStep); }
  std::size_t channels() const { return lag_days.size() + 1; }
  Shape x_shape() const { return {window_steps(), neighbor_count, channels()}; }
  NeighborQuery query(std::string target, TimePoint anchor) const;
};

/// First and last valid anchor times of day for a window: channel 1 and the
/// neighbour history need `history` before t0; the centred lag windows and
/// the target need room after it.
struct AnchorRange {
  Minutes first;
  Minutes last;
  std::size_t per_day() const;
};
AnchorRange anchor_range(const DayWindow& window, const DatasetConfig& config);

struct SampleInfo {
  std::string target;
  TimePoint anchor{};
  std::vector<std::string> neighbors;  // ranked, as used for the columns
  bool shortfall = false;              // columns padded with the last neighbour

  friend bool operator==(const SampleInfo&, const SampleInfo&) = default;
};

/// One (X, Y) pair. X is window x neighbours x channels, Y is horizon x 1 x 1.
struct Sample {
  Tensor x;
  Tensor y;
  SampleInfo info;
};

/// Unnormalised sample in mph. Throws Errc::insufficient_history naming the
/// day when a required day or reading is missing, Errc::range when the
/// anchor lies outside the valid range.
Sample build_raw_sample(const SpeedMatrix& matrix, const SensorNetwork& network,
                        std::string_view target, TimePoint anchor, const DatasetConfig& config);
/// build_raw_sample normalised with `params` (clamped to [0, 1]).
Sample build_sample(const SpeedMatrix& matrix, const SensorNetwork& network,
                    std::string_view target, TimePoint anchor, const DatasetConfig& config,
                    const NormalizationParams& params);

/// Compact sample store: X as 32-bit floats, Y as doubles.
class SampleSet {
 public:
  SampleSet() = default;
  SampleSet(Shape x_shape, std::size_t horizon);

  void append(std::span<const double> x, std::span<const double> y, SampleInfo info);
  void append(const Sample& s) { append(s.x.data(), s.y.data(), s.info); }

  std::size_t size() const noexcept { return infos_.size(); }
  bool empty() const noexcept { return infos_.empty(); }
  const Shape& x_shape() const noexcept { return x_shape_; }
  std::size_t x_size() const noexcept { return x_size_; }
  std::size_t horizon() const noexcept { return horizon_; }
  Shape y_shape() const { return {horizon_, 1, 1}; }

  std::span<const float> x_values(std::size_t i) const {
    return {x_.data() + i * x_size_, x_size_};
  }
  std::span<const double> y_values(std::size_t i) const {
    return {y_.data() + i * horizon_, horizon_};
  }
  const SampleInfo& info(std::size_t i) const { return infos_.at(i); }

  Tensor x(std::size_t i) const;
  Tensor y(std::size_t i) const;
  Tensor x_batch(std::span<const std::size_t> idx) const;
  Tensor y_batch(std::span<const std::size_t> idx) const;
  /// Target-sensor history: X[:, 0, 0].
  std::vector<double> target_history(std::size_t i) const;

  SampleSet subset(std::span<const std::size_t> idx) const;
  SampleSet head(std::size_t count) const;

 private:
  Shape x_shape_;
  std::size_t x_size_ = 0;
  std::size_t horizon_ = 0;
  std::vector<float> x_;
  std::vector<double> y_;
  std::vector<SampleInfo> infos_;
};

struct DatasetSplit {
  SampleSet train;
  SampleSet test;
  NormalizationParams params;
  double train_fraction = 0.70;
  std::size_t padded = 0;  // samples whose neighbour list fell short
};

/// Every target in `targets` (all matrix sensors when empty) at every valid
/// anchor from the first day with full lag history. Samples are ordered by
/// anchor then target; the first `train_fraction` of anchors (rounded to a
/// whole anchor) form the training split. Normalisation is fitted on the
/// raw training samples only. Throws Errc::empty_dataset without anchors.
DatasetSplit build_dataset(const SpeedMatrix& matrix, const SensorNetwork& network,
                           std::span<const std::string> targets, const DatasetConfig& config);

// Archive layout: <dir>/meta.json and <dir>/samples.bin (little-endian
// float32, X then Y per sample, train samples first).
void save_dataset(const DatasetSplit& split, const std::filesystem::path& dir);
DatasetSplit load_dataset(const std::filesystem::path& dir);

}  // namespace stsc

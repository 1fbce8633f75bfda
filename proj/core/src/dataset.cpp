#include "stsc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>

#include <json.hpp>

#include "stsc/error.hpp"
#include "stsc/io.hpp"
#include "stsc/parallel.hpp"

namespace stsc {

using nlohmann::json;

void NormalizationParams::validate() const {
  if (!std::isfinite(min) || !std::isfinite(max) || !(min < max))
    throw Error(Errc::degenerate_range, "normalization range [" + format_double(min) + ", " +
                                            format_double(max) + "] is degenerate");
}

double NormalizationParams::normalize(double z) const {
  validate();
  return (z - min) / (max - min);
}

double NormalizationParams::normalize_clamped(double z) const {
  return std::clamp(normalize(z), 0.0, 1.0);
}

double NormalizationParams::denormalize(double z) const {
  validate();
  return z * (max - min) + min;
}

Tensor NormalizationParams::normalize(const Tensor& t) const {
  Tensor out = t;
  for (auto& v : out.data()) v = normalize(v);
  return out;
}

Tensor NormalizationParams::denormalize(const Tensor& t) const {
  Tensor out = t;
  for (auto& v : out.data()) v = denormalize(v);
  return out;
}

NormalizationParams fit_normalization(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::empty_input, "no values to fit normalization on");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  NormalizationParams p{*lo, *hi};
  p.validate();
  return p;
}

void DatasetConfig::validate() const {
  query("", TimePoint{}).validate();
  if (window_steps() % 2 != 0)
    throw Error(Errc::config, "history window must span an even number of 5-minute steps");
  if (horizon_steps < 1) throw Error(Errc::config, "horizon must be >= 1 step");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw Error(Errc::config, "train fraction must lie in (0, 1]");
  if (anchor_stride < 1) throw Error(Errc::config, "anchor stride must be >= 1");
  if (neighbor_cache < Minutes{0} || neighbor_cache % kStep != Minutes{0})
    throw Error(Errc::config, "neighbor cache interval must be a non-negative multiple of 5 minutes");
  if (lag_days.empty()) throw Error(Errc::config, "at least one lag day is required");
  for (std::size_t d : lag_days)
    if (d < 1) throw Error(Errc::config, "lag days must be >= 1");
  if (threads < 1) throw Error(Errc::config, "threads must be >= 1");
}

NeighborQuery DatasetConfig::query(std::string target, TimePoint anchor) const {
  return NeighborQuery{std::move(target), anchor, distance_km, history, neighbor_count};
}

std::size_t AnchorRange::per_day() const {
  return last < first ? 0 : static_cast<std::size_t>((last - first) / kStep) + 1;
}

AnchorRange anchor_range(const DayWindow& window, const DatasetConfig& config) {
  const Minutes after = std::max(kStep * static_cast<long>(config.window_steps() / 2),
                                 kStep * static_cast<long>(config.horizon_steps));
  return {window.start + config.history, window.end - after};
}

namespace {

struct Ranked {
  std::vector<std::size_t> columns;  // matrix columns, padded to m
  bool shortfall = false;
};

Ranked rank_columns(const SpeedMatrix& matrix, const SensorNetwork& network,
                    std::string_view target, TimePoint when, const DatasetConfig& config) {
  const RankedSensors r =
      select_neighbors(matrix, network, config.query(std::string(target), when));
  Ranked out;
  for (const auto& id : r.selected) out.columns.push_back(matrix.sensor_index(id));
  out.shortfall = r.shortfall;
  while (out.columns.size() < config.neighbor_count) out.columns.push_back(out.columns.back());
  return out;
}

void check_anchor(const SpeedMatrix& matrix, TimePoint anchor, const DatasetConfig& config) {
  const AnchorRange range = anchor_range(matrix.window(), config);
  const Minutes tod = time_of_day(anchor);
  if (!matrix.row_of(anchor) || tod < range.first || tod > range.last)
    throw Error(Errc::range, "anchor " + format_timestamp(anchor) + " outside the valid range");
  const auto day = static_cast<std::size_t>((day_of(anchor) - matrix.first_day()).count());
  for (std::size_t lag : config.lag_days)
    if (day < lag)
      throw Error(Errc::insufficient_history,
                  "day " + format_date(day_of(anchor) - std::chrono::days(lag)) +
                      " is not covered by the data");
}

double cell(const SpeedMatrix& matrix, std::size_t row, std::size_t col) {
  const double v = matrix.at(row, col);
  if (is_missing(v))
    throw Error(Errc::insufficient_history,
                "missing reading for " + matrix.sensors()[col] + " on day " +
                    format_date(day_of(matrix.time(row))));
  return v;
}

// Raw values laid out as (window, neighbours, channels) and (horizon, 1, 1).
void fill_raw(const SpeedMatrix& matrix, TimePoint anchor, std::size_t target_col,
              const Ranked& ranked, const DatasetConfig& config, std::span<double> x,
              std::span<double> y) {
  const std::size_t steps = config.window_steps();
  const std::size_t m = config.neighbor_count;
  const std::size_t c = config.channels();
  const std::size_t anchor_row = *matrix.row_of(anchor);
  const std::size_t day = anchor_row / matrix.slots_per_day();
  const std::size_t slot = anchor_row % matrix.slots_per_day();
  const std::size_t half = steps / 2;

  for (std::size_t w = 0; w < m; ++w) {
    const std::size_t col = ranked.columns[w];
    for (std::size_t h = 0; h < steps; ++h)
      x[(h * m + w) * c] = cell(matrix, anchor_row + 1 + h - steps, col);
    for (std::size_t k = 0; k < config.lag_days.size(); ++k) {
      const std::size_t base = matrix.row(day - config.lag_days[k], slot);
      for (std::size_t h = 0; h < steps; ++h)
        x[(h * m + w) * c + k + 1] = cell(matrix, base + 1 + h - half, col);
    }
  }
  for (std::size_t i = 0; i < config.horizon_steps; ++i)
    y[i] = cell(matrix, anchor_row + 1 + i, target_col);
}

SampleInfo make_info(const SpeedMatrix& matrix, std::string_view target, TimePoint anchor,
                     const Ranked& ranked) {
  SampleInfo info{std::string(target), anchor, {}, ranked.shortfall};
  for (std::size_t col : ranked.columns) info.neighbors.push_back(matrix.sensors()[col]);
  return info;
}

}  // namespace

Sample build_raw_sample(const SpeedMatrix& matrix, const SensorNetwork& network,
                        std::string_view target, TimePoint anchor, const DatasetConfig& config) {
  config.validate();
  const std::size_t target_col = matrix.sensor_index(target);
  check_anchor(matrix, anchor, config);
  const Ranked ranked = rank_columns(matrix, network, target, anchor, config);
  Sample s{Tensor(config.x_shape()), Tensor({config.horizon_steps, 1, 1}),
           make_info(matrix, target, anchor, ranked)};
  fill_raw(matrix, anchor, target_col, ranked, config, s.x.data(), s.y.data());
  return s;
}

Sample build_sample(const SpeedMatrix& matrix, const SensorNetwork& network,
                    std::string_view target, TimePoint anchor, const DatasetConfig& config,
                    const NormalizationParams& params) {
  Sample s = build_raw_sample(matrix, network, target, anchor, config);
  for (auto& v : s.x.data()) v = params.normalize_clamped(v);
  for (auto& v : s.y.data()) v = params.normalize_clamped(v);
  return s;
}

SampleSet::SampleSet(Shape x_shape, std::size_t horizon)
    : x_shape_(std::move(x_shape)), x_size_(shape_size(x_shape_)), horizon_(horizon) {}

void SampleSet::append(std::span<const double> x, std::span<const double> y, SampleInfo info) {
  if (x.size() != x_size_ || y.size() != horizon_)
    throw Error(Errc::dimension, "sample does not match the set's shapes");
  for (double v : x) x_.push_back(static_cast<float>(v));
  y_.insert(y_.end(), y.begin(), y.end());
  infos_.push_back(std::move(info));
}

Tensor SampleSet::x(std::size_t i) const {
  const auto v = x_values(i);
  return Tensor(x_shape_, std::vector<double>(v.begin(), v.end()));
}

Tensor SampleSet::y(std::size_t i) const {
  const auto v = y_values(i);
  return Tensor(y_shape(), std::vector<double>(v.begin(), v.end()));
}

Tensor SampleSet::x_batch(std::span<const std::size_t> idx) const {
  Shape shape{idx.size()};
  shape.insert(shape.end(), x_shape_.begin(), x_shape_.end());
  Tensor out(std::move(shape));
  double* dst = out.raw();
  for (std::size_t i : idx) {
    const auto v = x_values(i);
    dst = std::copy(v.begin(), v.end(), dst);
  }
  return out;
}

Tensor SampleSet::y_batch(std::span<const std::size_t> idx) const {
  Tensor out({idx.size(), horizon_, 1, 1});
  double* dst = out.raw();
  for (std::size_t i : idx) {
    const auto v = y_values(i);
    dst = std::copy(v.begin(), v.end(), dst);
  }
  return out;
}

std::vector<double> SampleSet::target_history(std::size_t i) const {
  const auto v = x_values(i);
  const std::size_t steps = x_shape_[0];
  const std::size_t stride = x_shape_[1] * x_shape_[2];
  std::vector<double> out(steps);
  for (std::size_t h = 0; h < steps; ++h) out[h] = v[h * stride];
  return out;
}

SampleSet SampleSet::subset(std::span<const std::size_t> idx) const {
  SampleSet out(x_shape_, horizon_);
  for (std::size_t i : idx) {
    const auto x = x_values(i);
    out.x_.insert(out.x_.end(), x.begin(), x.end());
    const auto y = y_values(i);
    out.y_.insert(out.y_.end(), y.begin(), y.end());
    out.infos_.push_back(infos_.at(i));
  }
  return out;
}

SampleSet SampleSet::head(std::size_t count) const {
  std::vector<std::size_t> idx(std::min(count, size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

DatasetSplit build_dataset(const SpeedMatrix& matrix, const SensorNetwork& network,
                           std::span<const std::string> targets, const DatasetConfig& config) {
  config.validate();
  std::vector<std::size_t> target_cols;
  if (targets.empty()) {
    target_cols.resize(matrix.sensor_count());
    std::iota(target_cols.begin(), target_cols.end(), std::size_t{0});
  } else {
    for (const auto& id : targets) target_cols.push_back(matrix.sensor_index(id));
  }

  const AnchorRange range = anchor_range(matrix.window(), config);
  const std::size_t first_day = *std::max_element(config.lag_days.begin(), config.lag_days.end());
  std::vector<TimePoint> anchors;
  for (std::size_t d = first_day; d < matrix.day_count(); ++d) {
    const Day day = matrix.first_day() + std::chrono::days(d);
    for (std::size_t k = 0; k < range.per_day(); k += config.anchor_stride)
      anchors.push_back(TimePoint(day) + range.first + kStep * static_cast<long>(k));
  }
  if (anchors.empty() || target_cols.empty())
    throw Error(Errc::empty_dataset, "no valid anchors: need more than " +
                                         std::to_string(first_day) + " days of data");

  std::size_t train_anchors = static_cast<std::size_t>(
      std::llround(config.train_fraction * static_cast<double>(anchors.size())));
  train_anchors = std::clamp<std::size_t>(train_anchors, 1, anchors.size());

  struct Task {
    TimePoint anchor;
    std::size_t target_col;
    TimePoint rank_time;
  };
  std::vector<Task> tasks;
  tasks.reserve(anchors.size() * target_cols.size());
  for (TimePoint a : anchors) {
    TimePoint rank_time = a;
    if (config.neighbor_cache > Minutes{0}) {
      const Minutes offset = time_of_day(a) - range.first;
      rank_time = TimePoint(day_of(a)) + range.first + (offset / config.neighbor_cache) * config.neighbor_cache;
    }
    for (std::size_t col : target_cols) tasks.push_back({a, col, rank_time});
  }
  const std::size_t train_tasks = train_anchors * target_cols.size();

  // Neighbour ranking, shared between anchors of one cache bucket.
  std::map<std::pair<TimePoint, std::size_t>, std::size_t> bucket_of;
  std::vector<std::pair<TimePoint, std::size_t>> buckets;
  std::vector<std::size_t> task_bucket(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto key = std::make_pair(tasks[i].rank_time, tasks[i].target_col);
    auto [it, inserted] = bucket_of.try_emplace(key, buckets.size());
    if (inserted) buckets.push_back(key);
    task_bucket[i] = it->second;
  }
  std::vector<Ranked> ranked(buckets.size());
  parallel_for(buckets.size(), config.threads, [&](std::size_t b) {
    ranked[b] = rank_columns(matrix, network, matrix.sensors()[buckets[b].second],
                             buckets[b].first, config);
  });

  for (const Task& t : tasks) check_anchor(matrix, t.anchor, config);

  // Normalisation from the raw training samples only.
  const std::size_t x_size = shape_size(config.x_shape());
  std::vector<double> lo(train_tasks), hi(train_tasks);
  parallel_for(train_tasks, config.threads, [&](std::size_t i) {
    std::vector<double> x(x_size), y(config.horizon_steps);
    fill_raw(matrix, tasks[i].anchor, tasks[i].target_col, ranked[task_bucket[i]], config, x, y);
    const auto [xl, xh] = std::minmax_element(x.begin(), x.end());
    const auto [yl, yh] = std::minmax_element(y.begin(), y.end());
    lo[i] = std::min(*xl, *yl);
    hi[i] = std::max(*xh, *yh);
  });

  DatasetSplit split;
  split.train_fraction = config.train_fraction;
  split.params = {*std::min_element(lo.begin(), lo.end()), *std::max_element(hi.begin(), hi.end())};
  split.params.validate();
  split.train = SampleSet(config.x_shape(), config.horizon_steps);
  split.test = SampleSet(config.x_shape(), config.horizon_steps);

  std::vector<double> x(x_size), y(config.horizon_steps);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Task& t = tasks[i];
    const Ranked& r = ranked[task_bucket[i]];
    fill_raw(matrix, t.anchor, t.target_col, r, config, x, y);
    for (auto& v : x) v = split.params.normalize_clamped(v);
    for (auto& v : y) v = split.params.normalize_clamped(v);
    if (r.shortfall) ++split.padded;
    (i < train_tasks ? split.train : split.test)
        .append(x, y, make_info(matrix, matrix.sensors()[t.target_col], t.anchor, r));
  }
  return split;
}

namespace {

json info_json(const SampleInfo& info) {
  return {{"target", info.target},
          {"anchor", format_timestamp(info.anchor)},
          {"neighbors", info.neighbors},
          {"shortfall", info.shortfall}};
}

SampleInfo info_from_json(const json& j) {
  return {j.at("target").get<std::string>(), parse_timestamp(j.at("anchor").get<std::string>()),
          j.at("neighbors").get<std::vector<std::string>>(), j.at("shortfall").get<bool>()};
}

}  // namespace

void save_dataset(const DatasetSplit& split, const std::filesystem::path& dir) {
  const SampleSet& tr = split.train;
  json meta;
  meta["format"] = 1;
  meta["x_shape"] = tr.x_shape();
  meta["horizon"] = tr.horizon();
  meta["normalization"] = {{"min", split.params.min}, {"max", split.params.max}};
  meta["train_fraction"] = split.train_fraction;
  meta["padded"] = split.padded;
  meta["train_count"] = tr.size();
  meta["test_count"] = split.test.size();
  json samples = json::array();
  std::string blob;
  blob.reserve((tr.size() + split.test.size()) * (tr.x_size() + tr.horizon()) * 4);
  for (const SampleSet* set : {&split.train, &split.test}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      samples.push_back(info_json(set->info(i)));
      append_f32_le(blob, set->x_values(i));
      const auto y = set->y_values(i);
      std::vector<float> yf(y.begin(), y.end());
      append_f32_le(blob, yf);
    }
  }
  meta["samples"] = std::move(samples);
  write_file_atomic(dir / "samples.bin", blob);
  write_file_atomic(dir / "meta.json", meta.dump(1));
}

DatasetSplit load_dataset(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(read_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw Error(Errc::parse, (dir / "meta.json").string() + ": " + e.what());
  }
  try {
    if (meta.at("format").get<int>() != 1)
      throw Error(Errc::version_mismatch, "unsupported dataset archive format");
    DatasetSplit split;
    const auto x_shape = meta.at("x_shape").get<Shape>();
    const auto horizon = meta.at("horizon").get<std::size_t>();
    split.params = {meta.at("normalization").at("min").get<double>(),
                    meta.at("normalization").at("max").get<double>()};
    split.params.validate();
    split.train_fraction = meta.at("train_fraction").get<double>();
    split.padded = meta.at("padded").get<std::size_t>();
    split.train = SampleSet(x_shape, horizon);
    split.test = SampleSet(x_shape, horizon);
    const auto train_count = meta.at("train_count").get<std::size_t>();
    const auto& samples = meta.at("samples");
    if (samples.size() != train_count + meta.at("test_count").get<std::size_t>())
      throw Error(Errc::parse, "sample count does not match the listed samples");

    const std::string blob = read_file(dir / "samples.bin");
    const std::size_t x_size = shape_size(x_shape);
    const std::size_t record = (x_size + horizon) * 4;
    if (blob.size() != record * samples.size())
      throw Error(Errc::truncated, (dir / "samples.bin").string() + " has " +
                                       std::to_string(blob.size()) + " bytes, expected " +
                                       std::to_string(record * samples.size()));
    std::vector<double> x(x_size), y(horizon);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const char* p = blob.data() + i * record;
      for (std::size_t k = 0; k < x_size; ++k) x[k] = read_f32_le(p + 4 * k);
      for (std::size_t k = 0; k < horizon; ++k) y[k] = read_f32_le(p + 4 * (x_size + k));
      (i < train_count ? split.train : split.test).append(x, y, info_from_json(samples[i]));
    }
    return split;
  } catch (const json::exception& e) {
    throw Error(Errc::parse, (dir / "meta.json").string() + ": " + e.what());
  }
}

}  // namespace stsc

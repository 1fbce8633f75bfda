// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every selected criterion passes.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "gradient_cases.hpp"
#include "oracles.hpp"
#include "stsc/baselines.hpp"
#include "stsc/cli.hpp"
#include "stsc/dataset.hpp"
#include "stsc/io.hpp"
#include "stsc/metrics.hpp"
#include "stsc/model.hpp"
#include "stsc/neighbors.hpp"
#include "stsc/stats.hpp"
#include "stsc/synthetic.hpp"

using namespace stsc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 120.0;
constexpr std::size_t kTopsisTrials = 100;
constexpr std::size_t kNeighborQueries = 50;
constexpr double kMetricTolerance = 1e-4;
constexpr double kKwtTolerance = 1e-9;
constexpr double kOverfitLoss = 1e-3;
constexpr std::size_t kOverfitEpochs = 500;
constexpr std::size_t kOverfitSamples = 8;
constexpr double kOverfitSeconds = 300.0;
constexpr double kPersistenceMargin = 0.20;
constexpr double kBenchmarkSeconds = 1800.0;
constexpr double kRoundTripRelative = 1e-6;
constexpr double kNormalizationTolerance = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  Outcome outcome(std::string detail) const {
    if (failures_.empty()) return {true, std::move(detail)};
    std::string msg = detail + "; failed: " + failures_.front();
    if (failures_.size() > 1) msg += " (+" + std::to_string(failures_.size() - 1) + " more)";
    return {false, msg};
  }

 private:
  std::vector<std::string> failures_;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& log) {
  std::ostringstream out, err;
  const int status = cli::run(args, out, err);
  log << out.str() << err.str();
  return status;
}

using MetricsTable = std::map<std::pair<std::string, std::size_t>, double>;

// technique,horizon_min,mae,... -> MAE keyed by (technique, horizon)
MetricsTable read_mae(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  MetricsTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    if (cells.size() < 3) throw Error(Errc::parse, "bad metrics row: " + line);
    table[{cells[0], std::stoul(cells[1])}] = std::stod(cells[2]);
  }
  return table;
}

double mae_at(const MetricsTable& t, const std::string& technique, std::size_t horizon) {
  const auto it = t.find({technique, horizon});
  if (it == t.end())
    throw Error(Errc::not_found, technique + " at " + std::to_string(horizon) + " min");
  return it->second;
}

SynthResult clean_line(std::size_t sensors, std::size_t days, std::uint64_t seed = 42) {
  SynthConfig cfg;
  cfg.sensor_count = sensors;
  cfg.day_count = days;
  cfg.rng_seed = seed;
  cfg.missing_rate = 0;
  cfg.outlier_rate = 0;
  return generate_synthetic(cfg);
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto start = Clock::now();
  Checks c;
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  std::size_t checked = 0;
  std::set<LayerKind> kinds;
  for (auto& gc : oracle::gradient_cases()) {
    auto layer = gc.make();
    const Tensor x = oracle::random_tensor(gc.input, rng);
    const auto g = oracle::check_gradients(*layer, x, rng);
    worst = std::max(worst, g.max_error);
    checked += g.checked;
    kinds.insert(layer->kind());
    c.expect(g.max_error <= kGradTolerance, gc.name + " rel error " + num(g.max_error) + " at " + g.worst);
  }
  for (LayerKind k : {LayerKind::conv, LayerKind::transposed_conv, LayerKind::batch_norm,
                      LayerKind::dense, LayerKind::activation, LayerKind::avg_pool,
                      LayerKind::upsample, LayerKind::residual_block, LayerKind::sequential})
    c.expect(kinds.count(k) == 1, "missing layer kind " + std::string(to_string(k)));
  const double secs = seconds_since(start);
  c.expect(secs < kGradSeconds, "runtime " + num(secs) + " s");
  return c.outcome(std::to_string(oracle::gradient_cases().size()) + " cases, " +
                   std::to_string(checked) + " entries, worst rel error " + num(worst, 3) +
                   ", " + num(secs, 3) + " s");
}

Outcome shape_contract() {
  Checks c;
  const ModelSpec spec;
  Network dae_x = build_dae_x(spec);
  Network dae_y = build_dae_y(spec);
  const Shape zx = dae_x.child("encoder").output_shape({60, 10, 4});
  const Shape zy = dae_y.child("encoder").output_shape({12, 1, 1});
  c.expect(zx == Shape{8, 2, 64}, "E_X gives " + shape_str(zx));
  c.expect(dae_x.child("decoder").output_shape(zx) == Shape{60, 10, 4}, "D_X does not invert");
  c.expect(zy == Shape{3, 1, 16}, "E_Y gives " + shape_str(zy));
  c.expect(dae_y.child("decoder").output_shape(zy) == Shape{12, 1, 1}, "D_Y does not invert");
  Network lfmm = build_lfmm(zx, zy, spec.lfmm_channels);
  const Shape zl = lfmm.output_shape(zx);
  c.expect(shape_size(zl) == 48 && zl == zy, "LFMM gives " + shape_str(zl));
  // The runtime pass over real tensors must agree with the static trace.
  Rng rng(1);
  dae_x.initialize(rng);
  dae_y.initialize(rng);
  lfmm.initialize(rng);
  Network cross = assemble_cross_connected(dae_x, dae_y, lfmm, spec);
  const Tensor x = oracle::random_tensor({2, 60, 10, 4}, rng, 0, 1);
  c.expect(dae_x.forward(x, Mode::eval).shape() == Shape{2, 60, 10, 4}, "DAE_X forward shape");
  c.expect(cross.forward(x, Mode::eval).shape() == Shape{2, 12, 1, 1}, "cross forward shape");
  return c.outcome("60x10x4 -> " + shape_str(zx) + " -> 60x10x4; 12x1x1 -> " + shape_str(zy) +
                   " -> 12x1x1; LFMM -> " + std::to_string(shape_size(zl)));
}

Outcome topsis_oracle() {
  Checks c;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> count(1, 5);
  std::uniform_real_distribution<double> corr(-1, 1), km(0, 10), diff(0, 20);
  std::size_t matched = 0;
  for (std::size_t trial = 0; trial < kTopsisTrials; ++trial) {
    const std::size_t n = count(rng);
    std::vector<std::vector<double>> rows;
    std::vector<double> flat;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back({corr(rng), km(rng), diff(rng)});
      flat.insert(flat.end(), rows.back().begin(), rows.back().end());
      ids.push_back("S" + std::to_string(i));
    }
    const auto got = topsis_rank(flat, n, 3, {}, ids);
    const auto want = oracle::brute_topsis(rows, {1, 1, 1}, {+1, -1, -1}, ids);
    matched += got.order == want.order;
  }
  c.expect(matched == kTopsisTrials, std::to_string(kTopsisTrials - matched) + " rankings differ");
  const std::vector<double> hand{1, 1, 2, 2};
  const std::vector<std::string> ids{"A", "B"};
  const auto r = topsis_rank(hand, 2, 2, TopsisSpec{{1, 1}, {+1, +1}}, ids);
  c.expect(std::abs(r.closeness[0]) < 1e-12 && std::abs(r.closeness[1] - 1.0) < 1e-12,
           "hand example closeness " + num(r.closeness[0]) + ", " + num(r.closeness[1]));
  return c.outcome(std::to_string(matched) + "/" + std::to_string(kTopsisTrials) +
                   " rankings match; hand example A=" + num(r.closeness[0]) +
                   " B=" + num(r.closeness[1]));
}

Outcome neighbor_oracle() {
  Checks c;
  const SynthResult s = clean_line(20, 2);
  const SpeedMatrix& m = s.observed;
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> sensor(0, 19), day(0, 1);
  const std::size_t window = 60;
  std::uniform_int_distribution<std::size_t> slot(window, m.slots_per_day() - 1);
  std::size_t agree = 0, first = 0;
  for (std::size_t q = 0; q < kNeighborQueries; ++q) {
    const std::string p = m.sensors()[sensor(rng)];
    const std::size_t row = m.row(day(rng), slot(rng));
    const NeighborQuery query{p, m.time(row)};
    const auto got = select_neighbors(m, s.network, query);
    const auto want = oracle::naive_neighbors(m, s.network, p, row, window, query.distance_km,
                                              query.neighbor_count);
    agree += got.selected == want;
    first += !got.selected.empty() && got.selected.front() == p;
  }
  c.expect(agree == kNeighborQueries, std::to_string(kNeighborQueries - agree) + " queries disagree");
  c.expect(first == kNeighborQueries, "target first in only " + std::to_string(first));
  return c.outcome(std::to_string(agree) + "/" + std::to_string(kNeighborQueries) +
                   " agree; target first in " +
                   num(100.0 * static_cast<double>(first) / kNeighborQueries) + "%");
}

Outcome metric_exactness() {
  Checks c;
  const std::vector<double> actual{50, 60}, predicted{55, 54};
  const Metrics m = compute_metrics(actual, predicted);
  c.expect(std::abs(m.mae - 5.5) <= kMetricTolerance, "MAE " + num(m.mae, 8));
  c.expect(std::abs(m.rmse - 5.5227) <= kMetricTolerance, "RMSE " + num(m.rmse, 8));
  c.expect(std::abs(m.mape - 10.0) <= kMetricTolerance, "MAPE " + num(m.mape, 8));
  const KwtResult k = kruskal_wallis({{1, 2}, {3, 4}});
  c.expect(std::abs(k.h - 2.4) <= kKwtTolerance, "H " + num(k.h, 12));
  const MctResult mct = multiple_comparison(kruskal_wallis({{1, 2, 3, 4}, {1, 2, 3, 4}, {1, 2, 3, 4}}));
  bool contains_zero = !mct.pairs.empty();
  for (const auto& p : mct.pairs) contains_zero = contains_zero && p.lower <= 0.0 && p.upper >= 0.0;
  c.expect(contains_zero, "identical-group interval excludes 0");
  return c.outcome("MAE " + num(m.mae, 6) + ", RMSE " + num(m.rmse, 6) + ", MAPE " + num(m.mape, 6) +
                   ", H " + num(k.h, 10) + ", " + std::to_string(mct.pairs.size()) +
                   " MCT intervals contain 0");
}

// First epoch (1-based) whose loss is below the threshold, or nullopt.
std::optional<std::size_t> reached(const std::vector<double>& curve) {
  for (std::size_t i = 0; i < curve.size(); ++i)
    if (curve[i] < kOverfitLoss) return i + 1;
  return std::nullopt;
}

Outcome overfit_oracles() {
  const auto start = Clock::now();
  Checks c;
  const SynthResult s = clean_line(10, 16);
  DatasetConfig dcfg;
  dcfg.anchor_stride = 30;
  const DatasetSplit split = build_dataset(s.observed, s.network, {}, dcfg);
  const SampleSet batch = split.train.head(kOverfitSamples);

  ModelSpec spec;
  spec.dropout = 0.0;
  TrainingConfig tc;  // default learning rate
  tc.batch_size = kOverfitSamples;
  tc.dropout_prob = 0.0;
  tc.epochs = kOverfitEpochs;

  std::string detail;
  auto record = [&](const std::string& name, const std::vector<double>& curve) {
    const auto hit = reached(curve);
    c.expect(hit.has_value(), name + " best loss " +
                                  num(*std::min_element(curve.begin(), curve.end()), 3));
    detail += (detail.empty() ? "" : ", ") + name + " " +
              (hit ? "epoch " + std::to_string(*hit) : std::string("not reached"));
  };

  Rng rng(7);
  Network dae_x = build_dae_x(spec);
  dae_x.initialize(rng);
  record("DAE_X", pretrain_dae(dae_x, batch, DaeInput::x, tc));

  Network dae_y = build_dae_y(spec);
  dae_y.initialize(rng);
  record("DAE_Y", pretrain_dae(dae_y, batch, DaeInput::y, tc));

  Network lfmm = build_lfmm(latent_x_shape(spec), latent_y_shape(spec), spec.lfmm_channels);
  lfmm.initialize(rng);
  Network cross = assemble_cross_connected(dae_x, dae_y, lfmm, spec);
  const CrossLoss cl = train_cross(cross, batch, tc, PhasePlan{0, kOverfitEpochs});
  record("cross", cl.finetune);

  const TrainPairs pairs = history_pairs(batch);
  const std::vector<std::size_t> hidden{64, 32};
  Network mlp = build_mlp(pairs.input_dim, hidden, pairs.output_dim);
  mlp.initialize(rng);
  record("MLP", train_mlp(mlp, pairs, tc));

  const double secs = seconds_since(start);
  c.expect(secs < kOverfitSeconds, "runtime " + num(secs) + " s");
  return c.outcome(detail + "; " + num(secs, 3) + " s");
}

struct Benchmark {
  int status = -1;
  double seconds = 0.0;
  MetricsTable mae;
  std::string error;
};

const Benchmark& benchmark(const fs::path& work, const fs::path& config) {
  static std::optional<Benchmark> cached;
  if (cached) return *cached;
  Benchmark b;
  const fs::path out = work / "benchmark";
  fs::remove_all(out);
  std::ofstream log(work / "benchmark.log");
  const auto start = Clock::now();
  const std::vector<std::string> common{"--config", config.string(), "--out", out.string()};
  std::vector<std::string> synth{"synth"}, all{"all"};
  synth.insert(synth.end(), common.begin(), common.end());
  all.insert(all.end(), common.begin(), common.end());
  b.status = run_cli(synth, log);
  if (b.status == cli::kOk) b.status = run_cli(all, log);
  b.seconds = seconds_since(start);
  if (b.status == cli::kOk)
    b.mae = read_mae(out / "metrics.csv");
  else
    b.error = "pipeline exit status " + std::to_string(b.status) + " (see benchmark.log)";
  cached = std::move(b);
  return *cached;
}

Outcome benchmark_margins(const fs::path& work, const fs::path& config) {
  const Benchmark& b = benchmark(work, config);
  if (b.status != cli::kOk) return {false, b.error};
  Checks c;
  std::string detail;
  for (std::size_t h : {30u, 60u}) {
    const double ours = mae_at(b.mae, "proposed", h), base = mae_at(b.mae, "persistence", h);
    const double gain = 1.0 - ours / base;
    c.expect(gain >= kPersistenceMargin, std::to_string(h) + " min gain over persistence " + num(gain));
    detail += std::to_string(h) + " min " + num(ours) + " vs persistence " + num(base) + " (" +
              num(100 * gain, 3) + "% better); ";
  }
  for (std::size_t h : {5u, 15u}) {
    const double ours = mae_at(b.mae, "proposed", h), base = mae_at(b.mae, "historical_average", h);
    c.expect(ours < base, std::to_string(h) + " min MAE " + num(ours) + " vs HA " + num(base));
    detail += std::to_string(h) + " min " + num(ours) + " vs HA " + num(base) + "; ";
  }
  c.expect(b.seconds < kBenchmarkSeconds, "runtime " + num(b.seconds) + " s");
  return c.outcome(detail + "runtime " + num(b.seconds, 4) + " s");
}

Outcome horizon_trend(const fs::path& work, const fs::path& config) {
  const Benchmark& b = benchmark(work, config);
  if (b.status != cli::kOk) return {false, b.error};
  Checks c;
  auto ratio = [&](const std::string& t) { return mae_at(b.mae, t, 60) / mae_at(b.mae, t, 5); };
  const double ours = ratio("proposed"), knn = ratio("knn"), mlp = ratio("mlp");
  c.expect(ours < knn, "ratio " + num(ours) + " not below kNN " + num(knn));
  c.expect(ours < mlp, "ratio " + num(ours) + " not below MLP " + num(mlp));
  return c.outcome("MAE60/MAE5 proposed " + num(ours) + ", kNN " + num(knn) + ", MLP " + num(mlp));
}

Outcome determinism(const fs::path& work) {
  Checks c;
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path config = dir / "config.json";
  write_file_atomic(config, R"({
  "synth": {"sensor_count": 10, "day_count": 16},
  "dataset": {"anchor_stride": 6},
  "training": {"pretrain_x_epochs": 1, "pretrain_y_epochs": 2, "lfmm_epochs": 1,
               "finetune_epochs": 1},
  "evaluation": {"mlp_epochs": 2}
})");
  std::ofstream log(dir / "runs.log");
  std::vector<std::string> metrics;
  for (const char* run : {"a", "b"}) {
    const std::string out = (dir / run).string();
    int status = run_cli({"synth", "--config", config.string(), "--out", out}, log);
    if (status == cli::kOk) status = run_cli({"all", "--config", config.string(), "--out", out}, log);
    c.expect(status == cli::kOk, std::string("run ") + run + " exit " + std::to_string(status));
    if (status == cli::kOk) metrics.push_back(read_file(dir / run / "metrics.csv"));
  }
  const bool identical = metrics.size() == 2 && metrics[0] == metrics[1];
  c.expect(identical, "metrics.csv differs between runs");

  // Trained checkpoint: save, reload, compare forward passes on the test split.
  double worst = 0.0;
  if (metrics.size() == 2) {
    ModelCheckpoint ck = load_checkpoint(dir / "a" / "model.ckpt");
    const DatasetSplit split = load_dataset(dir / "a" / "dataset");
    const fs::path copy = dir / "roundtrip.ckpt";
    save_checkpoint(ck, copy);
    ModelCheckpoint back = load_checkpoint(copy);
    const Tensor p = predict(ck.network, split.test, ck.params);
    const Tensor q = predict(back.network, split.test, back.params);
    c.expect(p.shape() == q.shape(), "prediction shapes differ");
    for (std::size_t i = 0; i < p.size() && i < q.size(); ++i)
      worst = std::max(worst, std::abs(p[i] - q[i]) / std::max(std::abs(p[i]), 1e-12));
  }
  // Untrained default-width model with non-default batch-norm statistics.
  const ModelSpec spec;
  Rng rng(5);
  Network dx = build_dae_x(spec), dy = build_dae_y(spec);
  Network lf = build_lfmm(latent_x_shape(spec), latent_y_shape(spec), spec.lfmm_channels);
  dx.initialize(rng);
  dy.initialize(rng);
  lf.initialize(rng);
  Network cross = assemble_cross_connected(dx, dy, lf, spec);
  cross.forward(oracle::random_tensor({4, 60, 10, 4}, rng, 0, 1), Mode::train);
  const ModelCheckpoint fresh{cross, Phase::finetuned, spec, {10.0, 80.0}, spec.x_shape};
  ModelCheckpoint reread = deserialize_checkpoint(serialize_checkpoint(fresh));
  const Tensor x = oracle::random_tensor({6, 60, 10, 4}, rng, 0, 1);
  const Tensor a = predict(cross, x, fresh.params), b = predict(reread.network, x, reread.params);
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(a[i]), 1e-12));
  c.expect(worst <= kRoundTripRelative, "round-trip relative error " + num(worst));
  return c.outcome(std::string("metrics.csv ") + (identical ? "byte-identical" : "differs") +
                   " across two runs; checkpoint round-trip max rel error " + num(worst, 3));
}

Outcome normalization_integrity() {
  Checks c;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> speed(0.0, 100.0);
  std::vector<double> values(10000);
  for (double& v : values) v = speed(rng);
  const NormalizationParams params = fit_normalization(values);
  double worst = 0.0;
  for (double v : values) {
    const double z = params.normalize(v);
    c.expect(z >= 0.0 && z <= 1.0, "normalised value outside [0, 1]");
    worst = std::max(worst, std::abs(params.denormalize(z) - v));
  }
  c.expect(worst <= kNormalizationTolerance, "round-trip error " + num(worst));

  const SynthResult s = clean_line(6, 16);
  DatasetConfig cfg;
  cfg.anchor_stride = 3;
  const DatasetSplit split = build_dataset(s.observed, s.network, {}, cfg);
  std::vector<double> raw;
  TimePoint last_train{};
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    const auto& info = split.train.info(i);
    const Sample r = build_raw_sample(s.observed, s.network, info.target, info.anchor, cfg);
    raw.insert(raw.end(), r.x.data().begin(), r.x.data().end());
    raw.insert(raw.end(), r.y.data().begin(), r.y.data().end());
    last_train = std::max(last_train, info.anchor);
  }
  c.expect(fit_normalization(raw) == split.params, "parameters differ from a train-only refit");
  // Readings after the last training target cannot influence the parameters.
  SpeedMatrix shifted = s.observed;
  const std::size_t from = *shifted.row_of(last_train) + cfg.horizon_steps + 1;
  for (std::size_t r = from; r < shifted.time_count(); ++r)
    for (std::size_t k = 0; k < shifted.sensor_count(); ++k) shifted.at(r, k) += 50.0;
  const DatasetSplit other = build_dataset(shifted, s.network, {}, cfg);
  c.expect(other.params == split.params, "test-period readings moved the parameters");
  c.expect(!split.test.empty(), "empty test split");
  return c.outcome("round-trip max error " + num(worst, 3) + "; params [" + num(split.params.min, 6) +
                   ", " + num(split.params.max, 6) + "] equal a train-only refit over " +
                   std::to_string(split.train.size()) + " samples and ignore test-period edits");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  fs::path work = fs::temp_directory_path() / "stsc_acceptance";
  fs::path config;
  std::vector<int> only;
  app.add_option("--work-dir", work, "Scratch directory for pipeline runs");
  app.add_option("--benchmark-config", config, "Config for the end-to-end benchmark")->required();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"shape contract", shape_contract},
      {"TOPSIS oracle", topsis_oracle},
      {"neighbour selection oracle", neighbor_oracle},
      {"metric and statistics exactness", metric_exactness},
      {"overfit oracles", overfit_oracles},
      {"end-to-end benchmark", [&] { return benchmark_margins(work, config); }},
      {"horizon error trend", [&] { return horizon_trend(work, config); }},
      {"determinism and persistence", [&] { return determinism(work); }},
      {"normalization integrity", normalization_integrity},
  };

  std::size_t failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    const auto start = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++ran;
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first
              << "): " << o.detail << " [" << num(seconds_since(start), 3) << " s]" << std::endl;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}

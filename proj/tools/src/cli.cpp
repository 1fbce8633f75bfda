#include "stsc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stsc/baselines.hpp"
#include "stsc/error.hpp"
#include "stsc/io.hpp"
#include "stsc/metrics.hpp"
#include "stsc/neighbors.hpp"
#include "stsc/report.hpp"
#include "stsc/stats.hpp"

namespace stsc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (!root.contains(name_)) return;
    node_ = &root.at(name_);
    if (!node_->is_object()) throw Error(Errc::config, "'" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& field) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      field = node_->at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(Errc::config, "bad value for '" + name_ + "." + key + "'");
    }
  }

  void minutes(const std::string& key, Minutes& field) {
    long long v = field.count();
    get(key, v);
    field = Minutes{v};
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [key, value] : node_->items())
      if (!seen_.count(key)) throw Error(Errc::config, "unknown key '" + name_ + "." + key + "'");
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& text) {
  if (text.empty()) return {};
  fs::path p(text);
  return p.is_relative() && !base.empty() ? base / p : p;
}

json to_json(const RunConfig& c) {
  return {
      {"paths",
       {{"speeds", c.speeds.string()},
        {"sensors", c.sensors.string()},
        {"distances", c.distances.string()},
        {"out", c.out.string()}}},
      {"seed", c.seed},
      {"threads", c.threads},
      {"synth",
       {{"sensor_count", c.synth.sensor_count},
        {"day_count", c.synth.day_count},
        {"start_date", c.synth.start_date},
        {"base_speed", c.synth.base_speed},
        {"morning_dip", c.synth.morning_dip},
        {"evening_dip", c.synth.evening_dip},
        {"rush_width_min", c.synth.rush_width_min},
        {"weekend_uplift", c.synth.weekend_uplift},
        {"weekend_dip_scale", c.synth.weekend_dip_scale},
        {"sensor_offset_std", c.synth.sensor_offset_std},
        {"lag_steps_per_sensor", c.synth.lag_steps_per_sensor},
        {"daily_level_std", c.synth.daily_level_std},
        {"daily_amplitude_jitter", c.synth.daily_amplitude_jitter},
        {"noise_std", c.synth.noise_std},
        {"missing_rate", c.synth.missing_rate},
        {"outlier_rate", c.synth.outlier_rate}}},
      {"cleaning",
       {{"max_missing_fraction", c.cleaning.max_missing_fraction},
        {"valid_low", c.cleaning.valid_low},
        {"valid_high", c.cleaning.valid_high},
        {"outlier_window", c.cleaning.outlier_window}}},
      {"neighbors",
       {{"distance_km", c.dataset.distance_km},
        {"history_min", c.dataset.history.count()},
        {"neighbor_count", c.dataset.neighbor_count},
        {"cache_min", c.dataset.neighbor_cache.count()}}},
      {"dataset",
       {{"horizon_steps", c.dataset.horizon_steps},
        {"train_fraction", c.dataset.train_fraction},
        {"anchor_stride", c.dataset.anchor_stride},
        {"lag_days", c.dataset.lag_days}}},
      {"model",
       {{"x_widths", c.model.x_widths},
        {"residual_blocks", c.model.residual_blocks},
        {"y_widths", c.model.y_widths},
        {"lfmm_channels", c.model.lfmm_channels}}},
      {"training",
       {{"learning_rate", c.training.learning_rate},
        {"batch_size", c.training.batch_size},
        {"beta1", c.training.beta1},
        {"beta2", c.training.beta2},
        {"epsilon", c.training.epsilon},
        {"dropout", c.training.dropout_prob},
        {"pretrain_x_epochs", c.pretrain_x_epochs},
        {"pretrain_y_epochs", c.pretrain_y_epochs},
        {"lfmm_epochs", c.phases.lfmm_epochs},
        {"finetune_epochs", c.phases.finetune_epochs},
        {"allow_untrained", c.allow_untrained}}},
      {"evaluation",
       {{"knn_k", c.evaluation.knn_k},
        {"mlp_hidden", c.evaluation.mlp_hidden},
        {"mlp_epochs", c.evaluation.mlp_epochs},
        {"stats_horizon", c.evaluation.stats_horizon},
        {"alpha", c.evaluation.alpha}}},
  };
}

}  // namespace

void RunConfig::validate() const {
  if (threads < 1) throw Error(Errc::config, "threads must be >= 1");
  synth.validate();
  cleaning.validate();
  dataset.validate();
  ModelSpec m = model;
  m.x_shape = dataset.x_shape();
  m.horizon = dataset.horizon_steps;
  m.dropout = training.dropout_prob;
  m.validate();
  training.validate();
  if (evaluation.knn_k < 1) throw Error(Errc::config, "evaluation.knn_k must be >= 1");
  if (!(evaluation.alpha > 0.0 && evaluation.alpha < 1.0))
    throw Error(Errc::config, "evaluation.alpha must lie in (0, 1)");
  horizon_component(evaluation.stats_horizon);
}

RunConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::config, std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error(Errc::config, "config must be a JSON object");

  RunConfig c;
  static const std::set<std::string> sections{"paths",  "seed",    "threads",  "synth",
                                              "cleaning", "neighbors", "dataset", "model",
                                              "training", "evaluation"};
  for (const auto& [key, value] : root.items())
    if (!sections.count(key)) throw Error(Errc::config, "unknown key '" + key + "'");
  try {
    if (root.contains("seed")) c.seed = root.at("seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    throw Error(Errc::config, "bad value for 'seed'");
  }
  try {
    if (root.contains("threads")) c.threads = root.at("threads").get<std::size_t>();
  } catch (const json::exception&) {
    throw Error(Errc::config, "bad value for 'threads'");
  }

  Section paths(root, "paths");
  std::string speeds, sensors, distances, out;
  paths.get("speeds", speeds);
  paths.get("sensors", sensors);
  paths.get("distances", distances);
  paths.get("out", out);
  paths.finish();
  c.speeds = resolve(base_dir, speeds);
  c.sensors = resolve(base_dir, sensors);
  c.distances = resolve(base_dir, distances);
  c.out = resolve(base_dir, out);

  Section synth(root, "synth");
  synth.get("sensor_count", c.synth.sensor_count);
  synth.get("day_count", c.synth.day_count);
  synth.get("start_date", c.synth.start_date);
  synth.get("base_speed", c.synth.base_speed);
  synth.get("morning_dip", c.synth.morning_dip);
  synth.get("evening_dip", c.synth.evening_dip);
  synth.get("rush_width_min", c.synth.rush_width_min);
  synth.get("weekend_uplift", c.synth.weekend_uplift);
  synth.get("weekend_dip_scale", c.synth.weekend_dip_scale);
  synth.get("sensor_offset_std", c.synth.sensor_offset_std);
  synth.get("lag_steps_per_sensor", c.synth.lag_steps_per_sensor);
  synth.get("daily_level_std", c.synth.daily_level_std);
  synth.get("daily_amplitude_jitter", c.synth.daily_amplitude_jitter);
  synth.get("noise_std", c.synth.noise_std);
  synth.get("missing_rate", c.synth.missing_rate);
  synth.get("outlier_rate", c.synth.outlier_rate);
  synth.finish();

  Section cleaning(root, "cleaning");
  cleaning.get("max_missing_fraction", c.cleaning.max_missing_fraction);
  cleaning.get("valid_low", c.cleaning.valid_low);
  cleaning.get("valid_high", c.cleaning.valid_high);
  cleaning.get("outlier_window", c.cleaning.outlier_window);
  cleaning.finish();

  Section neighbors(root, "neighbors");
  neighbors.get("distance_km", c.dataset.distance_km);
  neighbors.minutes("history_min", c.dataset.history);
  neighbors.get("neighbor_count", c.dataset.neighbor_count);
  neighbors.minutes("cache_min", c.dataset.neighbor_cache);
  neighbors.finish();

  Section dataset(root, "dataset");
  dataset.get("horizon_steps", c.dataset.horizon_steps);
  dataset.get("train_fraction", c.dataset.train_fraction);
  dataset.get("anchor_stride", c.dataset.anchor_stride);
  dataset.get("lag_days", c.dataset.lag_days);
  dataset.finish();

  Section model(root, "model");
  model.get("x_widths", c.model.x_widths);
  model.get("residual_blocks", c.model.residual_blocks);
  model.get("y_widths", c.model.y_widths);
  model.get("lfmm_channels", c.model.lfmm_channels);
  model.finish();

  Section training(root, "training");
  training.get("learning_rate", c.training.learning_rate);
  training.get("batch_size", c.training.batch_size);
  training.get("beta1", c.training.beta1);
  training.get("beta2", c.training.beta2);
  training.get("epsilon", c.training.epsilon);
  training.get("dropout", c.training.dropout_prob);
  training.get("pretrain_x_epochs", c.pretrain_x_epochs);
  training.get("pretrain_y_epochs", c.pretrain_y_epochs);
  training.get("lfmm_epochs", c.phases.lfmm_epochs);
  training.get("finetune_epochs", c.phases.finetune_epochs);
  training.get("allow_untrained", c.allow_untrained);
  training.finish();

  Section evaluation(root, "evaluation");
  evaluation.get("knn_k", c.evaluation.knn_k);
  evaluation.get("mlp_hidden", c.evaluation.mlp_hidden);
  evaluation.get("mlp_epochs", c.evaluation.mlp_epochs);
  evaluation.get("stats_horizon", c.evaluation.stats_horizon);
  evaluation.get("alpha", c.evaluation.alpha);
  evaluation.finish();

  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

std::string config_json(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

Layout make_layout(const RunConfig& config) {
  Layout l;
  l.out = config.out.empty() ? fs::path("stsc_out") : config.out;
  l.speeds = config.speeds.empty() ? l.out / "speeds.csv" : config.speeds;
  l.sensors = config.sensors.empty() ? l.out / "sensors.csv" : config.sensors;
  l.distances = config.distances;
  return l;
}

namespace {

// ---------------------------------------------------------------------------
// Subcommands

struct Flags {
  std::optional<std::string> at;
  std::optional<std::string> sensor;
  std::optional<std::size_t> horizon;
};

struct Context {
  RunConfig config;
  Layout layout;
  Flags flags;
  std::ostream& out;
  std::ostream& err;
  json details = json::object();

  ModelSpec model_spec() const {
    ModelSpec m = config.model;
    m.x_shape = config.dataset.x_shape();
    m.horizon = config.dataset.horizon_steps;
    m.dropout = config.training.dropout_prob;
    return m;
  }
  DatasetConfig dataset_config() const {
    DatasetConfig d = config.dataset;
    d.threads = config.threads;
    return d;
  }
  TrainingConfig training(std::size_t epochs, std::uint64_t seed_offset) const {
    TrainingConfig t = config.training;
    t.epochs = epochs;
    t.rng_seed = config.seed + seed_offset;
    return t;
  }
  FitOptions fit_options(std::string tag) const { return {&err, std::move(tag)}; }
};

SensorNetwork load_network(const Layout& layout) {
  auto sensors = load_sensors_csv(layout.sensors);
  std::vector<DistanceOverride> overrides;
  if (!layout.distances.empty()) overrides = load_distances_csv(layout.distances);
  return build_distance_matrix(std::move(sensors), overrides);
}

SpeedMatrix load_cleaned(const Layout& layout) { return load_speed_csv(layout.cleaned()); }

std::string fixed(double v, int digits = 3) { return format_fixed(v, digits); }

void cmd_synth(Context& ctx) {
  SynthConfig sc = ctx.config.synth;
  sc.rng_seed = ctx.config.seed;
  const SynthResult r = generate_synthetic(sc);
  const fs::path speeds = ctx.layout.out / "speeds.csv";
  const fs::path sensors = ctx.layout.out / "sensors.csv";
  write_file_atomic(speeds, speed_csv(r.observed));
  write_file_atomic(sensors, sensors_csv(r.sensors));
  std::size_t missing = 0, outliers = 0;
  for (Injection i : r.injected) {
    missing += i == Injection::missing;
    outliers += i == Injection::outlier;
  }
  ctx.out << "synth: " << r.observed.sensor_count() << " sensors x " << r.observed.day_count()
          << " days (" << r.observed.time_count() << " steps), " << missing << " missing, "
          << outliers << " outliers -> " << speeds.string() << "\n";
  ctx.details = {{"speeds", speeds.string()}, {"sensors", sensors.string()},
                 {"missing", missing},        {"outliers", outliers}};
}

void cmd_clean(Context& ctx) {
  const SpeedMatrix raw = load_speed_csv(ctx.layout.speeds);
  const CleanResult r = clean(raw, ctx.config.cleaning);
  write_file_atomic(ctx.layout.cleaned(), speed_csv(r.matrix));
  json dropped = json::array();
  for (const auto& d : r.report.dropped)
    dropped.push_back({{"sensor_id", d.id}, {"missing_fraction", d.missing_fraction}});
  ctx.details = {{"input", ctx.layout.speeds.string()},
                 {"output", ctx.layout.cleaned().string()},
                 {"sensors_kept", r.matrix.sensor_count()},
                 {"dropped", dropped},
                 {"interpolated", r.report.interpolated},
                 {"edge_filled", r.report.edge_filled},
                 {"outliers_replaced", r.report.outliers_replaced}};
  write_file_atomic(ctx.layout.out / "clean_report.json", ctx.details.dump(2) + "\n");
  ctx.out << "clean: kept " << r.matrix.sensor_count() << " of " << raw.sensor_count()
          << " sensors, interpolated " << r.report.interpolated << ", edge-filled "
          << r.report.edge_filled << ", replaced " << r.report.outliers_replaced << " outliers -> "
          << ctx.layout.cleaned().string() << "\n";
}

TimePoint default_anchor(const SpeedMatrix& m, const DatasetConfig& d) {
  const AnchorRange range = anchor_range(m.window(), d);
  return TimePoint(m.first_day() + std::chrono::days(m.day_count() - 1)) + range.first;
}

void cmd_neighbors(Context& ctx) {
  const SpeedMatrix m = load_cleaned(ctx.layout);
  const SensorNetwork net = load_network(ctx.layout);
  const DatasetConfig d = ctx.dataset_config();
  const TimePoint at = ctx.flags.at ? parse_timestamp(*ctx.flags.at) : default_anchor(m, d);
  std::vector<std::string> targets =
      ctx.flags.sensor ? std::vector<std::string>{*ctx.flags.sensor} : m.sensors();
  std::vector<std::pair<std::string, RankedSensors>> rankings;
  std::size_t shortfalls = 0;
  for (const auto& t : targets) {
    rankings.emplace_back(t, select_neighbors(m, net, d.query(t, at)));
    shortfalls += rankings.back().second.shortfall;
  }
  const fs::path path = ctx.layout.out / "neighbors.csv";
  write_file_atomic(path, neighbors_csv(rankings));
  for (const auto& [t, r] : rankings) {
    ctx.out << t << ":";
    for (const auto& id : r.selected) ctx.out << ' ' << id;
    ctx.out << (r.shortfall ? " (shortfall)" : "") << "\n";
  }
  ctx.out << "neighbors at " << format_timestamp(at) << " -> " << path.string() << "\n";
  ctx.details = {{"anchor", format_timestamp(at)},
                 {"targets", targets.size()},
                 {"shortfalls", shortfalls},
                 {"output", path.string()}};
}

void cmd_dataset(Context& ctx) {
  const SpeedMatrix m = load_cleaned(ctx.layout);
  const SensorNetwork net = load_network(ctx.layout);
  const DatasetSplit split = build_dataset(m, net, {}, ctx.dataset_config());
  save_dataset(split, ctx.layout.dataset());
  ctx.out << "dataset: " << split.train.size() << " train / " << split.test.size()
          << " test samples of " << shape_str(split.train.x_shape()) << ", normalization ["
          << format_double(split.params.min) << ", " << format_double(split.params.max) << "]";
  if (split.padded) ctx.out << ", " << split.padded << " padded for neighbour shortfall";
  ctx.out << " -> " << ctx.layout.dataset().string() << "\n";
  ctx.details = {{"train", split.train.size()},
                 {"test", split.test.size()},
                 {"padded", split.padded},
                 {"min", split.params.min},
                 {"max", split.params.max},
                 {"train_last_anchor", split.train.empty()
                                           ? ""
                                           : format_timestamp(split.train.info(split.train.size() - 1).anchor)},
                 {"test_first_anchor",
                  split.test.empty() ? "" : format_timestamp(split.test.info(0).anchor)}};
}

void cmd_pretrain(Context& ctx, DaeInput input) {
  const DatasetSplit split = load_dataset(ctx.layout.dataset());
  const ModelSpec spec = ctx.model_spec();
  const bool is_x = input == DaeInput::x;
  Network dae = is_x ? build_dae_x(spec) : build_dae_y(spec);
  Rng rng(ctx.config.seed + (is_x ? 0 : 1));
  dae.initialize(rng);
  const std::size_t epochs = is_x ? ctx.config.pretrain_x_epochs : ctx.config.pretrain_y_epochs;
  const std::string tag = is_x ? "pretrain-x" : "pretrain-y";
  const auto curve = pretrain_dae(dae, split.train, input, ctx.training(epochs, is_x ? 10 : 11),
                                  ctx.fit_options(tag));
  ModelCheckpoint cp{std::move(dae), is_x ? Phase::pretrain_x : Phase::pretrain_y, spec,
                     split.params, is_x ? spec.x_shape : spec.y_shape()};
  const fs::path path = is_x ? ctx.layout.dae_x() : ctx.layout.dae_y();
  save_checkpoint(cp, path);
  ctx.out << tag << ": " << epochs << " epochs, final loss "
          << (curve.empty() ? std::string("n/a") : format_double(curve.back())) << " -> "
          << path.string() << "\n";
  ctx.details = {{"epochs", epochs}, {"loss", curve}, {"output", path.string()}};
}

void cmd_train(Context& ctx) {
  const DatasetSplit split = load_dataset(ctx.layout.dataset());
  const ModelCheckpoint dx = load_checkpoint(ctx.layout.dae_x());
  const ModelCheckpoint dy = load_checkpoint(ctx.layout.dae_y());
  const ModelSpec spec = dx.spec;
  Network lfmm = build_lfmm(latent_x_shape(spec), latent_y_shape(spec), spec.lfmm_channels);
  Rng rng(ctx.config.seed + 2);
  lfmm.initialize(rng);
  Network cross = assemble_cross_connected(dx, dy, lfmm, ctx.config.allow_untrained);
  const CrossLoss loss =
      train_cross(cross, split.train, ctx.training(0, 12), ctx.config.phases, ctx.fit_options("train"));
  const Phase phase = ctx.config.phases.finetune_epochs > 0 ? Phase::finetuned : Phase::cross;
  ModelCheckpoint cp{std::move(cross), phase, spec, split.params, spec.x_shape};
  save_checkpoint(cp, ctx.layout.model());
  const auto last = [](const std::vector<double>& v) {
    return v.empty() ? std::string("n/a") : format_double(v.back());
  };
  ctx.out << "train: phase A " << loss.lfmm.size() << " epochs (loss " << last(loss.lfmm)
          << "), phase B " << loss.finetune.size() << " epochs (loss " << last(loss.finetune)
          << ") -> " << ctx.layout.model().string() << "\n";
  ctx.details = {{"lfmm_loss", loss.lfmm},
                 {"finetune_loss", loss.finetune},
                 {"phase", to_string(phase)},
                 {"output", ctx.layout.model().string()}};
}

void print_report_table(std::ostream& out, std::span<const MetricsReport> reports) {
  out << "technique            horizon    MAE     RMSE    MAPE%\n";
  for (const auto& r : reports)
    for (const auto& row : r.rows) {
      std::string name = r.technique;
      name.resize(std::max<std::size_t>(name.size(), 20), ' ');
      out << name << ' ' << std::string(row.horizon_min < 10 ? 6 : 5, ' ') << row.horizon_min
          << "  " << fixed(row.metrics.mae) << "  " << fixed(row.metrics.rmse) << "  "
          << fixed(row.metrics.mape, 2) << "\n";
    }
}

void cmd_evaluate(Context& ctx) {
  const DatasetSplit split = load_dataset(ctx.layout.dataset());
  if (split.test.empty()) throw Error(Errc::empty_input, "the dataset has no test samples");
  ModelCheckpoint cp = load_checkpoint(ctx.layout.model());
  const NormalizationParams& params = split.params;

  struct Technique {
    std::string name;
    Tensor predicted;
  };
  std::vector<Technique> techniques;
  techniques.push_back({"proposed", predict(cp.network, split.test, cp.params)});
  techniques.push_back({"persistence", naive_predictions(NaiveKind::persistence, split.test, params)});
  techniques.push_back(
      {"historical_average", naive_predictions(NaiveKind::historical_average, split.test, params)});

  const TrainPairs train = history_pairs(split.train);
  const TrainPairs test = history_pairs(split.test);
  const std::size_t k = std::min(ctx.config.evaluation.knn_k, train.size());
  Tensor knn = knn_predictions(train, test, k, ctx.config.threads);
  techniques.push_back({"knn", params.denormalize(knn)});

  Network mlp = build_mlp(train.input_dim, ctx.config.evaluation.mlp_hidden, train.output_dim);
  Rng rng(ctx.config.seed + 3);
  mlp.initialize(rng);
  const auto mlp_curve = train_mlp(mlp, train, ctx.training(ctx.config.evaluation.mlp_epochs, 13),
                                   ctx.fit_options("mlp"));
  techniques.push_back({"mlp", params.denormalize(mlp_predictions(mlp, test))});

  std::vector<MetricsReport> reports;
  std::ostringstream per_sensor;
  per_sensor << "technique,sensor_id,horizon_min,mae\n";
  for (const auto& t : techniques) {
    reports.push_back(evaluate_horizons(t.name, t.predicted, split.test, params));
    for (std::size_t h : kReportHorizons)
      for (const auto& s : per_sensor_mae(t.predicted, split.test, params, h))
        per_sensor << t.name << ',' << s.sensor_id << ',' << h << ',' << format_fixed(s.mae, 6) << '\n';
  }
  write_file_atomic(ctx.layout.metrics(), metrics_csv(reports));
  write_file_atomic(ctx.layout.sensor_mae(), per_sensor.str());
  for (MetricKind kind : {MetricKind::mae, MetricKind::rmse, MetricKind::mape}) {
    std::string name(to_string(kind));
    std::transform(name.begin(), name.end(), name.begin(), [](char c) { return char(std::tolower(c)); });
    write_file_atomic(ctx.layout.out / ("chart_" + name + ".svg"), metric_chart_svg(reports, kind));
  }
  print_report_table(ctx.out, reports);
  ctx.out << "evaluate: " << split.test.size() << " test samples -> " << ctx.layout.metrics().string()
          << "\n";
  json rows = json::array();
  for (const auto& r : reports)
    for (const auto& row : r.rows)
      rows.push_back({{"technique", r.technique},
                      {"horizon_min", row.horizon_min},
                      {"mae", row.metrics.mae},
                      {"rmse", row.metrics.rmse},
                      {"mape", row.metrics.mape}});
  ctx.details = {{"test_samples", split.test.size()}, {"metrics", rows}, {"mlp_loss", mlp_curve}};
}

void cmd_stats(Context& ctx) {
  const std::size_t horizon = ctx.flags.horizon.value_or(ctx.config.evaluation.stats_horizon);
  horizon_component(horizon);
  const std::string text = read_file(ctx.layout.sensor_mae());
  std::vector<std::string> names;
  std::vector<std::vector<double>> groups;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (++line_no == 1 || line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4)
      throw Error(Errc::parse, ctx.layout.sensor_mae().string() + " line " + std::to_string(line_no));
    if (std::stoul(std::string(f[2])) != horizon) continue;
    const std::string name(f[0]);
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      names.push_back(name);
      groups.emplace_back();
      it = names.end() - 1;
    }
    groups[static_cast<std::size_t>(it - names.begin())].push_back(std::stod(std::string(f[3])));
  }
  if (groups.size() < 2)
    throw Error(Errc::empty_input, "no per-sensor errors at " + std::to_string(horizon) + " min");
  const KwtResult kwt = kruskal_wallis(groups);
  const MctResult mct = multiple_comparison(kwt, ctx.config.evaluation.alpha);
  write_file_atomic(ctx.layout.out / "kwt.csv", kwt_csv(kwt, names));
  write_file_atomic(ctx.layout.out / "mct.csv", mct_csv(mct, names));
  ctx.out << "Kruskal-Wallis at " << horizon << " min: H = " << fixed(kwt.h, 4) << ", dof "
          << kwt.dof << ", p = " << format_double(kwt.p_value) << "\n";
  for (const auto& p : mct.pairs)
    ctx.out << "  " << names[p.i] << " vs " << names[p.j] << ": " << fixed(p.difference) << " ["
            << fixed(p.lower) << ", " << fixed(p.upper) << "] p_adj " << format_double(p.p_adjusted)
            << (p.significant ? " *" : "") << "\n";
  ctx.details = {{"horizon_min", horizon}, {"h", kwt.h}, {"p_value", kwt.p_value}, {"groups", names}};
}

void cmd_predict(Context& ctx) {
  if (!ctx.flags.at || !ctx.flags.sensor)
    throw Error(Errc::config, "predict needs --at and --sensor");
  ModelCheckpoint cp = load_checkpoint(ctx.layout.model());
  const SpeedMatrix m = load_cleaned(ctx.layout);
  const SensorNetwork net = load_network(ctx.layout);
  const TimePoint at = parse_timestamp(*ctx.flags.at);
  DatasetConfig d = ctx.dataset_config();
  const AnchorRange range = anchor_range(m.window(), d);
  const Minutes tod = time_of_day(at);
  if (tod < range.first || tod > range.last)
    throw Error(Errc::insufficient_history,
                "forecast anchors must lie between " +
                    format_timestamp(TimePoint(day_of(at)) + range.first).substr(11) + " and " +
                    format_timestamp(TimePoint(day_of(at)) + range.last).substr(11) +
                    " so every input window stays inside the daily observation window");
  const Sample s = build_sample(m, net, *ctx.flags.sensor, at, d, cp.params);
  if (s.x.shape() != cp.input_shape)
    throw Error(Errc::dimension, "model expects " + shape_str(cp.input_shape) + ", sample is " +
                                     shape_str(s.x.shape()));
  const Tensor y = predict(cp.network, s.x, cp.params);
  json values = json::array();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t minutes = 5 * (i + 1);
    if (ctx.flags.horizon && *ctx.flags.horizon != minutes) continue;
    const std::string ts = format_timestamp(at + Minutes(minutes));
    ctx.out << ts << ',' << format_fixed(y[i], 2) << "\n";
    values.push_back({{"time", ts}, {"mph", y[i]}});
  }
  if (ctx.flags.horizon && values.empty())
    throw Error(Errc::config, "horizon " + std::to_string(*ctx.flags.horizon) +
                                  " min is not one of the model's 5-minute steps");
  ctx.details = {{"sensor", *ctx.flags.sensor}, {"anchor", format_timestamp(at)}, {"forecast", values}};
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::io: return kMissingInput;
    case Errc::config: return kConfigError;
    case Errc::divergence: return kDiverged;
    default: return kDataError;
  }
}

void append_summary(const Layout& layout, const std::string& command, int status, double seconds,
                    const json& details, const std::string& message) {
  json line = {{"command", command}, {"exit_code", status}, {"seconds", seconds}};
  if (!message.empty()) line["error"] = message;
  if (!details.empty()) line["details"] = details;
  std::string existing;
  if (fs::exists(layout.summary())) existing = read_file(layout.summary());
  write_file_atomic(layout.summary(), existing + line.dump() + "\n");
}

using Step = std::function<void(Context&)>;

const std::vector<std::pair<std::string, Step>>& steps() {
  static const std::vector<std::pair<std::string, Step>> all{
      {"clean", cmd_clean},
      {"neighbors", cmd_neighbors},
      {"dataset", cmd_dataset},
      {"pretrain-x", [](Context& c) { cmd_pretrain(c, DaeInput::x); }},
      {"pretrain-y", [](Context& c) { cmd_pretrain(c, DaeInput::y); }},
      {"train", cmd_train},
      {"evaluate", cmd_evaluate},
      {"stats", cmd_stats},
  };
  return all;
}

int execute(const std::string& command, Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  int status = kOk;
  std::string message;
  try {
    if (command == "synth") {
      cmd_synth(ctx);
    } else if (command == "predict") {
      cmd_predict(ctx);
    } else {
      bool found = false;
      for (const auto& [name, step] : steps())
        if (name == command) {
          step(ctx);
          found = true;
        }
      if (!found) throw Error(Errc::config, "unknown subcommand '" + command + "'");
    }
  } catch (const Error& e) {
    status = exit_code(e.code());
    message = e.what();
  } catch (const fs::filesystem_error& e) {
    status = kMissingInput;
    message = e.what();
  } catch (const std::exception& e) {
    status = kUnexpected;
    message = e.what();
  }
  if (status != kOk) ctx.err << "error: " << command << ": " << message << "\n";
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    append_summary(ctx.layout, command, status, seconds, ctx.details, message);
  } catch (const std::exception& e) {
    ctx.err << "warning: could not write run summary: " << e.what() << "\n";
  }
  return status;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multistep traffic-speed forecasting toolkit", "stsc"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  Flags flags;
  app.add_option("--config", config_path, "JSON run configuration (defaults apply to missing keys)");
  app.add_option("--out", out_dir, "Output directory (default: paths.out, then $STSC_OUT, then ./stsc_out)");
  app.add_option("--seed", seed, "Seed for data synthesis, initialisation and shuffling");
  app.add_option("--threads", threads, "Worker threads; 1 is the deterministic reference path")
      ->check(CLI::PositiveNumber);

  struct Command {
    const char* name;
    const char* help;
  };
  static constexpr Command commands[] = {
      {"synth", "Generate a synthetic speed field (speeds.csv, sensors.csv)"},
      {"clean", "Drop sparse sensors, fill gaps and replace outliers (cleaned.csv)"},
      {"neighbors", "Rank neighbouring sensors at one anchor time (neighbors.csv)"},
      {"dataset", "Build the normalised train/test sample archive (dataset/)"},
      {"pretrain-x", "Pre-train the input auto-encoder (dae_x.ckpt)"},
      {"pretrain-y", "Pre-train the target auto-encoder (dae_y.ckpt)"},
      {"train", "Cross-connect the auto-encoders and train the mapping (model.ckpt)"},
      {"predict", "Print the 12-step forecast for one sensor and anchor time"},
      {"evaluate", "Score the model and baselines per horizon (metrics.csv, charts)"},
      {"stats", "Kruskal-Wallis and multiple comparison on per-sensor MAE"},
      {"all", "Run clean, neighbors, dataset, pretrain-x, pretrain-y, train, evaluate, stats"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->fallthrough();
    const std::string name = c.name;
    if (name == "neighbors" || name == "predict") {
      auto* at = sub->add_option("--at", flags.at, "Anchor time t0, \"YYYY-MM-DD HH:MM\"");
      auto* sensor = sub->add_option("--sensor", flags.sensor, "Target sensor id");
      if (name == "predict") {
        at->required();
        sensor->required();
      }
    }
    if (name == "predict" || name == "stats")
      sub->add_option("--horizon", flags.horizon,
                      name == "predict" ? "Only print this horizon (minutes, multiple of 5)"
                                        : "Horizon in minutes whose per-sensor MAE is compared");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  RunConfig config;
  try {
    if (!config_path.empty()) config = load_config(config_path);
    if (seed) config.seed = *seed;
    if (threads) config.threads = *threads;
    if (!out_dir.empty()) {
      config.out = out_dir;
    } else if (const char* env = std::getenv("STSC_OUT"); env && *env && config.out.empty()) {
      config.out = env;
    }
    config.validate();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::io ? kMissingInput : kConfigError;
  }

  Context ctx{config, make_layout(config), flags, out, err};
  if (command != "all") return execute(command, ctx);
  for (const auto& [name, step] : steps()) {
    ctx.details = json::object();
    if (const int status = execute(name, ctx); status != kOk) return status;
  }
  return kOk;
}

}  // namespace stsc::cli

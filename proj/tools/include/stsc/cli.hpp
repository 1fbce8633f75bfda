#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "stsc/cleaning.hpp"
#include "stsc/dataset.hpp"
#include "stsc/model.hpp"
#include "stsc/optim.hpp"
#include "stsc/synthetic.hpp"

namespace stsc::cli {

// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kUnexpected = 1;
inline constexpr int kMissingInput = 2;
inline constexpr int kConfigError = 3;
inline constexpr int kDiverged = 4;
inline constexpr int kDataError = 5;

struct EvaluationConfig {
  std::size_t knn_k = 17;
  std::vector<std::size_t> mlp_hidden{64, 32};
  std::size_t mlp_epochs = 50;
  std::size_t stats_horizon = 60;  // minutes; per-sensor MAE used by `stats`
  double alpha = 0.05;
};

struct RunConfig {
  // Relative paths resolve against the config file's directory; empty
  // speeds/sensors default to the files `synth` writes into the output dir.
  std::filesystem::path speeds;
  std::filesystem::path sensors;
  std::filesystem::path distances;
  std::filesystem::path out;

  std::uint64_t seed = 42;
  std::size_t threads = 1;

  SynthConfig synth;
  CleaningConfig cleaning;
  DatasetConfig dataset;
  ModelSpec model;
  TrainingConfig training;
  std::size_t pretrain_x_epochs = 50;
  std::size_t pretrain_y_epochs = 50;
  PhasePlan phases;
  bool allow_untrained = false;
  EvaluationConfig evaluation;

  void validate() const;
};

/// Parses a JSON config on top of the defaults. Unknown keys and type errors
/// raise Errc::config naming the offending key.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
/// Full config (defaults included) as pretty-printed JSON.
std::string config_json(const RunConfig& config);

/// Artifact locations for a run.
struct Layout {
  std::filesystem::path out;
  std::filesystem::path speeds;
  std::filesystem::path sensors;
  std::filesystem::path distances;  // empty: haversine only

  std::filesystem::path cleaned() const { return out / "cleaned.csv"; }
  std::filesystem::path dataset() const { return out / "dataset"; }
  std::filesystem::path dae_x() const { return out / "dae_x.ckpt"; }
  std::filesystem::path dae_y() const { return out / "dae_y.ckpt"; }
  std::filesystem::path model() const { return out / "model.ckpt"; }
  std::filesystem::path metrics() const { return out / "metrics.csv"; }
  std::filesystem::path sensor_mae() const { return out / "sensor_mae.csv"; }
  std::filesystem::path summary() const { return out / "run_summary.jsonl"; }
};

Layout make_layout(const RunConfig& config);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stsc::cli

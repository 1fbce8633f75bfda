#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "stsc/dataset.hpp"
#include "stsc/network.hpp"
#include "stsc/optim.hpp"

namespace stsc {

/// Architecture widths. The defaults give the 60x10x4 -> 8x2x64 and
/// 12x1x1 -> 3x1x16 latent shapes.
struct ModelSpec {
  Shape x_shape{60, 10, 4};
  std::size_t horizon = 12;
  std::vector<std::size_t> x_widths{16, 32, 64};  // the three stride-2 convs
  std::size_t residual_blocks = 3;
  std::vector<std::size_t> y_widths{8, 16, 16};   // the three (3,1) convs
  std::size_t lfmm_channels = 16;
  double dropout = 0.2;

  void validate() const;
  Shape y_shape() const { return {horizon, 1, 1}; }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Networks are nested: a DAE holds "encoder" and "decoder"; the
// cross-connected model holds "encoder_x", "lfmm" and "decoder_y".

/// Throws Errc::config when the widths break shape inversion.
Network build_dae_x(const ModelSpec& spec);
Network build_dae_y(const ModelSpec& spec);
Network build_lfmm(const Shape& zx_shape, const Shape& zy_shape, std::size_t channels);

Shape latent_x_shape(const ModelSpec& spec);
Shape latent_y_shape(const ModelSpec& spec);
/// Output paddings that make each transposed conv of D_X invert the
/// matching encoder conv; order follows the decoder.
std::vector<Extent> decoder_output_padding(const ModelSpec& spec);

enum class Phase { untrained, pretrain_x, pretrain_y, cross, finetuned };
std::string_view to_string(Phase phase) noexcept;
Phase parse_phase(std::string_view text);

enum class DaeInput { x, y };

/// Trains a DAE to reconstruct X tensors or Y vectors of `samples`.
/// Returns the per-epoch mean loss.
std::vector<double> pretrain_dae(Network& dae, const SampleSet& samples, DaeInput input,
                                 const TrainingConfig& config, const FitOptions& options = {});

/// D_Y o LFMM o E_X built from copies of the parts. Throws Errc::config on
/// incompatible latent shapes.
Network assemble_cross_connected(const Network& dae_x, const Network& dae_y, const Network& lfmm,
                                 const ModelSpec& spec);

struct PhasePlan {
  std::size_t lfmm_epochs = 30;      // phase A: E_X and D_Y frozen
  std::size_t finetune_epochs = 20;  // phase B: everything trainable
};

struct CrossLoss {
  std::vector<double> lfmm;
  std::vector<double> finetune;
};

/// Phase A then phase B; `config.epochs` is ignored in favour of the plan.
CrossLoss train_cross(Network& cross, const SampleSet& samples, const TrainingConfig& config,
                      const PhasePlan& plan, const FitOptions& options = {});

/// Forward pass in eval mode, denormalised and clamped to [min, max].
/// Accepts one X (H, W, C) or a batch (N, H, W, C); returns (N, horizon).
Tensor predict(Network& cross, const Tensor& x, const NormalizationParams& params);
/// Predictions in mph for every sample of a set, row-major (N, horizon).
Tensor predict(Network& cross, const SampleSet& samples, const NormalizationParams& params,
               std::size_t batch_size = 256);

struct ModelCheckpoint {
  Network network;
  Phase phase = Phase::untrained;
  ModelSpec spec;
  NormalizationParams params;
  Shape input_shape;
};

/// Binary format: "STSC0001", u32 LE header length, JSON header (layer tree,
/// phase, spec, normalisation, parameter manifest), float32 LE blobs.
/// Same, from checkpoints: requires the pretrain-x / pretrain-y phase tags
/// (Errc::state otherwise) unless `allow_untrained` is set.
Network assemble_cross_connected(const ModelCheckpoint& dae_x, const ModelCheckpoint& dae_y,
                                 const Network& lfmm, bool allow_untrained = false);

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
/// Errc::version_mismatch, Errc::parse, Errc::truncated or
/// Errc::shape_mismatch on bad input.
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const ModelCheckpoint& checkpoint);
ModelCheckpoint deserialize_checkpoint(std::string_view bytes);

}  // namespace stsc

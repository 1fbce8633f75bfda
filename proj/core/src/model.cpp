#include "stsc/model.hpp"

#include <algorithm>

#include "stsc/error.hpp"

namespace stsc {

namespace {

constexpr Extent kSquare3{3, 3};
constexpr Extent kColumn3{3, 1};
constexpr Extent kPool{2, 1};

// Shape contract for the default dimensions: E_X 60x10 -> 8x2, D_X back to
// 60x10 with output paddings {0,0},{1,0},{1,1}; E_Y 12 -> 3, D_Y back to 12;
// LFMM conv 8x2 -> 10x4 before the dense map onto 3x1x16.
constexpr std::size_t down(std::size_t n) { return conv_out_size(n, 3, 2, 1); }
constexpr std::size_t up(std::size_t n, std::size_t out_pad) {
  return transposed_out_size(n, 3, 2, 1, out_pad);
}
static_assert(down(down(down(60))) == 8 && down(down(down(10))) == 2);
static_assert(up(up(up(8, 0), 1), 1) == 60 && up(up(up(2, 0), 0), 1) == 10);
static_assert(conv_out_size(12, 3, 1, 1) / 2 / 2 == 3 && conv_out_size(3, 3, 1, 1) == 3);
static_assert(conv_out_size(8, 3, 1, 2) == 10 && conv_out_size(2, 3, 1, 2) == 4);
static_assert(10 * 4 * 16 == 640 && 3 * 1 * 16 == 48);


void add_conv_bn_tanh(Network& net, const LayerSpec& conv) {
  net.add(conv)
      .add(LayerSpec::batch_norm(conv.channels_out))
      .add(LayerSpec::activation_layer(Activation::tanh));
}

Network encoder_x(const ModelSpec& spec) {
  Network enc;
  std::size_t cin = spec.x_shape[2];
  for (std::size_t w : spec.x_widths) {
    add_conv_bn_tanh(enc, LayerSpec::conv(cin, w, kSquare3, {2, 2}, {1, 1}));
    cin = w;
  }
  for (std::size_t i = 0; i < spec.residual_blocks; ++i) enc.add(LayerSpec::residual_block(cin));
  enc.add(LayerSpec::dropout(spec.dropout));
  return enc;
}

Network encoder_y(const ModelSpec& spec) {
  const auto& w = spec.y_widths;
  Network enc;
  add_conv_bn_tanh(enc, LayerSpec::conv(1, w[0], kColumn3, {1, 1}, {1, 0}));
  enc.add(LayerSpec::avg_pool(kPool));
  add_conv_bn_tanh(enc, LayerSpec::conv(w[0], w[1], kColumn3, {1, 1}, {1, 0}));
  enc.add(LayerSpec::avg_pool(kPool));
  enc.add(LayerSpec::dropout(spec.dropout));
  add_conv_bn_tanh(enc, LayerSpec::conv(w[1], w[2], kColumn3, {1, 1}, {1, 0}));
  return enc;
}

void expect_shape(const Shape& got, const Shape& want, const std::string& what) {
  if (got != want)
    throw Error(Errc::config, what + " produces " + shape_str(got) + ", expected " + shape_str(want));
}

Shape checked_output(const Network& net, const Shape& in, const std::string& what) {
  try {
    return net.output_shape(in);
  } catch (const Error& e) {
    throw Error(Errc::config, what + ": " + e.what());
  }
}

}  // namespace

void ModelSpec::validate() const {
  if (x_shape.size() != 3 || shape_size(x_shape) == 0)
    throw Error(Errc::config, "input shape must be H x W x C with positive extents");
  if (x_widths.empty()) throw Error(Errc::config, "E_X needs at least one conv width");
  if (y_widths.size() != 3) throw Error(Errc::config, "E_Y takes exactly three conv widths");
  if (std::ranges::count(x_widths, 0u) || std::ranges::count(y_widths, 0u) || lfmm_channels == 0)
    throw Error(Errc::config, "layer widths must be >= 1");
  if (horizon == 0 || horizon % 4 != 0)
    throw Error(Errc::config, "horizon " + std::to_string(horizon) +
                                  " is not divisible by the two (2,1) pools");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw Error(Errc::config, "dropout probability must lie in [0, 1)");
}

std::vector<Extent> decoder_output_padding(const ModelSpec& spec) {
  spec.validate();
  std::vector<Extent> sizes{{spec.x_shape[0], spec.x_shape[1]}};
  for (std::size_t i = 0; i < spec.x_widths.size(); ++i)
    sizes.push_back({conv_out_size(sizes.back().h, 3, 2, 1), conv_out_size(sizes.back().w, 3, 2, 1)});
  std::vector<Extent> pads;
  for (std::size_t i = sizes.size() - 1; i > 0; --i) {
    const Extent from = sizes[i], to = sizes[i - 1];
    const auto pad = [&](std::size_t in, std::size_t want) {
      const std::size_t base = transposed_out_size(in, 3, 2, 1, 0);
      if (want < base || want - base >= 2)
        throw Error(Errc::config, "no output padding maps " + std::to_string(in) + " back to " +
                                      std::to_string(want));
      return want - base;
    };
    pads.push_back({pad(from.h, to.h), pad(from.w, to.w)});
  }
  return pads;
}

Shape latent_x_shape(const ModelSpec& spec) {
  spec.validate();
  return checked_output(encoder_x(spec), spec.x_shape, "E_X");
}

Shape latent_y_shape(const ModelSpec& spec) {
  spec.validate();
  return checked_output(encoder_y(spec), spec.y_shape(), "E_Y");
}

Network build_dae_x(const ModelSpec& spec) {
  const Shape z = latent_x_shape(spec);
  const auto pads = decoder_output_padding(spec);
  const auto& w = spec.x_widths;
  const std::size_t n = w.size();

  Network dec;
  for (std::size_t i = 0; i < spec.residual_blocks; ++i) dec.add(LayerSpec::residual_block(w[n - 1]));
  for (std::size_t i = n - 1; i > 0; --i)
    add_conv_bn_tanh(dec, LayerSpec::transposed_conv(w[i], w[i - 1], kSquare3, {2, 2}, {1, 1},
                                                     pads[n - 1 - i]));
  dec.add(LayerSpec::dropout(spec.dropout));
  dec.add(LayerSpec::transposed_conv(w[0], spec.x_shape[2], kSquare3, {2, 2}, {1, 1}, pads[n - 1]));
  dec.add(LayerSpec::activation_layer(Activation::sigmoid));
  expect_shape(checked_output(dec, z, "D_X"), spec.x_shape, "D_X");

  Network dae;
  dae.add("encoder", encoder_x(spec));
  dae.add("decoder", std::move(dec));
  return dae;
}

Network build_dae_y(const ModelSpec& spec) {
  const Shape z = latent_y_shape(spec);
  const auto& w = spec.y_widths;
  Network dec;
  add_conv_bn_tanh(dec, LayerSpec::transposed_conv(w[2], w[1], kColumn3, {1, 1}, {1, 0}, {0, 0}));
  dec.add(LayerSpec::upsample(kPool));
  add_conv_bn_tanh(dec, LayerSpec::transposed_conv(w[1], w[0], kColumn3, {1, 1}, {1, 0}, {0, 0}));
  dec.add(LayerSpec::upsample(kPool));
  dec.add(LayerSpec::dropout(spec.dropout));
  dec.add(LayerSpec::transposed_conv(w[0], 1, kColumn3, {1, 1}, {1, 0}, {0, 0}));
  dec.add(LayerSpec::activation_layer(Activation::sigmoid));
  expect_shape(checked_output(dec, z, "D_Y"), spec.y_shape(), "D_Y");

  Network dae;
  dae.add("encoder", encoder_y(spec));
  dae.add("decoder", std::move(dec));
  return dae;
}

Network build_lfmm(const Shape& zx_shape, const Shape& zy_shape, std::size_t channels) {
  if (zx_shape.size() != 3 || zy_shape.size() != 3 || shape_size(zx_shape) == 0 ||
      shape_size(zy_shape) == 0 || channels == 0)
    throw Error(Errc::config, "LFMM needs rank-3 latent shapes and >= 1 channel, got " +
                                  shape_str(zx_shape) + " -> " + shape_str(zy_shape));
  const std::size_t h = zx_shape[0] + 2, w = zx_shape[1] + 2;
  Network lfmm;
  lfmm.add(LayerSpec::conv(zx_shape[2], channels, kSquare3, {1, 1}, {2, 2}));
  lfmm.add(LayerSpec::flatten());
  lfmm.add(LayerSpec::dense(h * w * channels, zy_shape[2], {zy_shape[0], zy_shape[1]}));
  expect_shape(checked_output(lfmm, zx_shape, "LFMM"), zy_shape, "LFMM");
  return lfmm;
}

std::string_view to_string(Phase phase) noexcept {
  switch (phase) {
    case Phase::untrained: return "untrained";
    case Phase::pretrain_x: return "pretrain-x";
    case Phase::pretrain_y: return "pretrain-y";
    case Phase::cross: return "cross";
    case Phase::finetuned: return "finetuned";
  }
  return "?";
}

Phase parse_phase(std::string_view text) {
  for (Phase p : {Phase::untrained, Phase::pretrain_x, Phase::pretrain_y, Phase::cross,
                  Phase::finetuned})
    if (to_string(p) == text) return p;
  throw Error(Errc::parse, "unknown phase tag '" + std::string(text) + "'");
}

std::vector<double> pretrain_dae(Network& dae, const SampleSet& samples, DaeInput input,
                                 const TrainingConfig& config, const FitOptions& options) {
  BatchFn batches = [&](std::span<const std::size_t> idx) {
    Tensor t = input == DaeInput::x ? samples.x_batch(idx) : samples.y_batch(idx);
    return std::pair{t, t};
  };
  return fit(dae, samples.size(), batches, config, options);
}

Network assemble_cross_connected(const Network& dae_x, const Network& dae_y, const Network& lfmm,
                                 const ModelSpec& spec) {
  const Network& ex = dae_x.child("encoder");
  const Network& dy = dae_y.child("decoder");
  const Shape zx = checked_output(ex, spec.x_shape, "E_X");
  const Shape zy = checked_output(lfmm, zx, "LFMM");
  expect_shape(zy, latent_y_shape(spec), "LFMM");
  expect_shape(checked_output(dy, zy, "D_Y"), spec.y_shape(), "D_Y");
  Network cross;
  cross.add("encoder_x", Network(ex));
  cross.add("lfmm", Network(lfmm));
  cross.add("decoder_y", Network(dy));
  return cross;
}

Network assemble_cross_connected(const ModelCheckpoint& dae_x, const ModelCheckpoint& dae_y,
                                 const Network& lfmm, bool allow_untrained) {
  if (!allow_untrained && (dae_x.phase != Phase::pretrain_x || dae_y.phase != Phase::pretrain_y))
    throw Error(Errc::state, "cross-connection expects pre-trained DAEs, got phases " +
                                 std::string(to_string(dae_x.phase)) + " and " +
                                 std::string(to_string(dae_y.phase)));
  if (!(dae_x.spec == dae_y.spec))
    throw Error(Errc::config, "DAE checkpoints were built from different model specs");
  return assemble_cross_connected(dae_x.network, dae_y.network, lfmm, dae_x.spec);
}

CrossLoss train_cross(Network& cross, const SampleSet& samples, const TrainingConfig& config,
                      const PhasePlan& plan, const FitOptions& options) {
  BatchFn batches = [&](std::span<const std::size_t> idx) {
    return std::pair{samples.x_batch(idx), samples.y_batch(idx)};
  };
  CrossLoss loss;
  Network& ex = cross.child("encoder_x");
  Network& dy = cross.child("decoder_y");
  Network& lfmm = cross.child("lfmm");

  if (plan.lfmm_epochs > 0) {
    ex.set_frozen(true);
    dy.set_frozen(true);
    lfmm.set_frozen(false);
    TrainingConfig a = config;
    a.epochs = plan.lfmm_epochs;
    FitOptions o = options;
    o.tag = options.tag + "/lfmm";
    try {
      loss.lfmm = fit(cross, samples.size(), batches, a, o);
    } catch (...) {
      cross.set_frozen(false);
      throw;
    }
  }
  cross.set_frozen(false);
  if (plan.finetune_epochs > 0) {
    TrainingConfig b = config;
    b.epochs = plan.finetune_epochs;
    b.rng_seed = config.rng_seed + 1;
    FitOptions o = options;
    o.tag = options.tag + "/finetune";
    loss.finetune = fit(cross, samples.size(), batches, b, o);
  }
  return loss;
}

namespace {

Tensor to_mph(Tensor out, const NormalizationParams& params) {
  const std::size_t n = out.dim(0);
  const std::size_t horizon = out.size() / n;
  out = std::move(out).reshaped({n, horizon});
  for (auto& v : out.data()) v = std::clamp(params.denormalize(v), params.min, params.max);
  return out;
}

}  // namespace

Tensor predict(Network& cross, const Tensor& x, const NormalizationParams& params) {
  params.validate();
  Tensor batch = x.rank() == 3 ? x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)}) : x;
  if (batch.rank() != 4)
    throw Error(Errc::dimension, "predict expects H x W x C or N x H x W x C, got " +
                                     shape_str(x.shape()));
  return to_mph(cross.forward(batch, Mode::eval), params);
}

Tensor predict(Network& cross, const SampleSet& samples, const NormalizationParams& params,
               std::size_t batch_size) {
  params.validate();
  Tensor out = predict_batched(
      cross, samples.size(), [&](std::span<const std::size_t> idx) { return samples.x_batch(idx); },
      batch_size);
  return to_mph(std::move(out), params);
}

}  // namespace stsc

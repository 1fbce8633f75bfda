#include <gtest/gtest.h>

#include <openssl/evp.h>

#include <cstring>
#include <filesystem>

#include "oracles.hpp"
#include "stsc/error.hpp"
#include "stsc/io.hpp"
#include "stsc/model.hpp"

using namespace stsc;

namespace {

template <class F>
Errc error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected stsc::Error";
  return Errc::io;
}

ModelSpec tiny_spec() {
  ModelSpec s;
  s.x_shape = {8, 4, 4};
  s.horizon = 4;
  s.x_widths = {2, 2, 2};
  s.residual_blocks = 1;
  s.y_widths = {2, 2, 2};
  s.lfmm_channels = 2;
  return s;
}

SampleSet random_samples(const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  SampleSet set(spec.x_shape, spec.horizon);
  std::vector<double> x(shape_size(spec.x_shape)), y(spec.horizon);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    set.append(x, y, SampleInfo{"S1", parse_timestamp("2017-06-01 12:00") + Minutes{5 * static_cast<long>(i)}, {}, false});
  }
  return set;
}

std::vector<Shape> spatial(const std::vector<Shape>& trace) {
  std::vector<Shape> out;
  for (const auto& s : trace)
    if (out.empty() || Shape{s[0], s[1]} != out.back()) out.push_back({s[0], s[1]});
  return out;
}

std::string sha256(Network& net) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  for (const auto& s : net.state())
    EVP_DigestUpdate(ctx, s.value->raw(), s.value->size() * sizeof(double));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return std::string(reinterpret_cast<char*>(md), len);
}

Network initialized(Network net, std::uint64_t seed) {
  Rng rng(seed);
  net.initialize(rng);
  return net;
}

}  // namespace

TEST(Architecture, DefaultTraces) {
  const ModelSpec spec;
  Network dae_x = build_dae_x(spec);
  Network dae_y = build_dae_y(spec);
  const auto enc_x = dae_x.child("encoder").trace({60, 10, 4});
  EXPECT_EQ(spatial(enc_x), (std::vector<Shape>{{60, 10}, {30, 5}, {15, 3}, {8, 2}}));
  EXPECT_EQ(enc_x.back(), (Shape{8, 2, 64}));
  const auto dec_x = dae_x.child("decoder").trace({8, 2, 64});
  EXPECT_EQ(spatial(dec_x), (std::vector<Shape>{{8, 2}, {15, 3}, {30, 5}, {60, 10}}));
  EXPECT_EQ(dec_x.back(), (Shape{60, 10, 4}));
  const auto pads = decoder_output_padding(spec);
  EXPECT_EQ(pads, (std::vector<Extent>{{0, 0}, {1, 0}, {1, 1}}));

  const auto enc_y = dae_y.child("encoder").trace({12, 1, 1});
  EXPECT_EQ(spatial(enc_y), (std::vector<Shape>{{12, 1}, {6, 1}, {3, 1}}));
  EXPECT_EQ(enc_y.back(), (Shape{3, 1, 16}));
  EXPECT_EQ(dae_y.child("decoder").output_shape({3, 1, 16}), (Shape{12, 1, 1}));

  Network lfmm = build_lfmm({8, 2, 64}, {3, 1, 16}, spec.lfmm_channels);
  const auto lt = lfmm.trace({8, 2, 64});
  EXPECT_EQ(lt[1], (Shape{10, 4, 16}));
  EXPECT_EQ(lt[2], (Shape{1, 1, 640}));
  EXPECT_EQ(shape_size(lt.back()), 48u);
  EXPECT_EQ(lt.back(), (Shape{3, 1, 16}));
}

TEST(Architecture, LayerOrderingConvBnTanh) {
  Network dae_x = build_dae_x(ModelSpec{});
  const Network& enc = dae_x.child("encoder");
  EXPECT_EQ(enc.at(0).kind(), LayerKind::conv);
  EXPECT_EQ(enc.at(1).kind(), LayerKind::batch_norm);
  EXPECT_EQ(enc.at(2).kind(), LayerKind::activation);
  EXPECT_EQ(enc.at(2).spec().activation, Activation::tanh);
  std::size_t residual = 0, dropout = 0;
  for (const auto& e : enc.entries()) {
    residual += e.layer->kind() == LayerKind::residual_block;
    dropout += e.layer->kind() == LayerKind::dropout;
  }
  EXPECT_EQ(residual, 3u);
  EXPECT_EQ(dropout, 1u);
  const Network& dec = dae_x.child("decoder");
  EXPECT_EQ(dec.at(dec.size() - 1).spec().activation, Activation::sigmoid);
}

TEST(Architecture, InvalidSpecsAreConfigErrors) {
  ModelSpec odd;
  odd.horizon = 10;
  EXPECT_EQ(error_code([&] { build_dae_y(odd); }), Errc::config);
  ModelSpec two;
  two.y_widths = {8, 16};
  EXPECT_EQ(error_code([&] { build_dae_y(two); }), Errc::config);
  ModelSpec zero;
  zero.x_widths = {16, 0, 64};
  EXPECT_EQ(error_code([&] { build_dae_x(zero); }), Errc::config);
  EXPECT_EQ(error_code([] { build_lfmm({8, 2, 64}, {3, 16}, 4); }), Errc::config);
  Network dae_x = build_dae_x(ModelSpec{});
  Network dae_y = build_dae_y(tiny_spec());
  Network lfmm = build_lfmm({8, 2, 64}, {3, 1, 16}, 4);
  EXPECT_EQ(error_code([&] { assemble_cross_connected(dae_x, dae_y, lfmm, ModelSpec{}); }),
            Errc::config);
}

TEST(Architecture, ResidualBlockZeroConvsPassZero) {
  ResidualBlock block(LayerSpec::residual_block(4));
  Rng rng(1);
  block.initialize(rng);
  for (std::size_t i : {0u, 3u}) {
    auto& conv = dynamic_cast<Conv2d&>(block.part(i));
    conv.weight().fill(0.0);
    conv.bias().fill(0.0);
  }
  const Tensor y = block.forward(Tensor({2, 5, 3, 4}, 0.0), Mode::train);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Architecture, LfmmZeroWeightsGiveBias) {
  Network lfmm = initialized(build_lfmm({8, 2, 64}, {3, 1, 16}, 4), 2);
  for (auto& s : lfmm.state()) {
    if (s.name.ends_with("weight")) s.value->fill(0.0);
    if (s.name.ends_with("bias")) s.value->fill(0.25);
  }
  Rng rng(3);
  const Tensor z = lfmm.forward(oracle::random_tensor({2, 8, 2, 64}, rng), Mode::eval);
  for (double v : z.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Architecture, CrossForwardShape) {
  const ModelSpec spec;
  Network cross = assemble_cross_connected(initialized(build_dae_x(spec), 1),
                                           initialized(build_dae_y(spec), 2),
                                           initialized(build_lfmm({8, 2, 64}, {3, 1, 16}, 16), 3),
                                           spec);
  Rng rng(4);
  const Tensor x = oracle::random_tensor({3, 60, 10, 4}, rng, 0, 1);
  const Tensor y = cross.forward(x, Mode::eval);
  EXPECT_EQ(y.shape(), (Shape{3, 12, 1, 1}));
  const NormalizationParams params{10, 80};
  const Tensor mph = predict(cross, x, params);
  EXPECT_EQ(mph.shape(), (Shape{3, 12}));
  for (double v : mph.data()) {
    EXPECT_GE(v, 10.0);
    EXPECT_LE(v, 80.0);
  }
  EXPECT_EQ(predict(cross, unstack(x, 1), params).shape(), (Shape{1, 12}));
  EXPECT_EQ(error_code([&] { predict(cross, Tensor({1, 60, 10, 3}), params); }), Errc::dimension);
}

TEST(Gradients, TinySpecEndToEnd) {
  const ModelSpec spec = tiny_spec();
  Network dae_x = initialized(build_dae_x(spec), 1);
  Network dae_y = initialized(build_dae_y(spec), 2);
  Network lfmm = initialized(build_lfmm(latent_x_shape(spec), latent_y_shape(spec), 2), 3);
  Network cross = assemble_cross_connected(dae_x, dae_y, lfmm, spec);
  std::mt19937_64 rng(5);
  struct Case {
    const char* name;
    Network* net;
    Shape in;
  } cases[] = {{"dae_x", &dae_x, {2, 8, 4, 4}},
               {"dae_y", &dae_y, {2, 4, 1, 1}},
               {"cross", &cross, {2, 8, 4, 4}}};
  for (auto& c : cases) {
    const auto report =
        oracle::check_gradients(*c.net, oracle::random_tensor(c.in, rng, 0, 1), rng, 1e-5, 32);
    EXPECT_LE(report.max_error, 1e-4) << c.name << ": " << report.worst;
  }
}

TEST(Training, ZeroEpochsLeaveParametersUnchanged) {
  const ModelSpec spec = tiny_spec();
  Network dae = initialized(build_dae_y(spec), 1);
  const Network before = dae;
  TrainingConfig cfg;
  cfg.epochs = 0;
  const auto loss = pretrain_dae(dae, random_samples(spec, 8, 1), DaeInput::y, cfg);
  EXPECT_TRUE(loss.empty());
  Network copy = before;
  auto a = dae.state(), b = copy.state();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].value, *b[i].value);
}

TEST(Training, PhaseAFreezesEncoderAndDecoder) {
  const ModelSpec spec = tiny_spec();
  Network cross = assemble_cross_connected(
      initialized(build_dae_x(spec), 1), initialized(build_dae_y(spec), 2),
      initialized(build_lfmm(latent_x_shape(spec), latent_y_shape(spec), 2), 3), spec);
  const std::string ex = sha256(cross.child("encoder_x"));
  const std::string dy = sha256(cross.child("decoder_y"));
  const std::string lf = sha256(cross.child("lfmm"));
  TrainingConfig cfg;
  cfg.batch_size = 4;
  train_cross(cross, random_samples(spec, 16, 2), cfg, {3, 0});
  EXPECT_EQ(sha256(cross.child("encoder_x")), ex);
  EXPECT_EQ(sha256(cross.child("decoder_y")), dy);
  EXPECT_NE(sha256(cross.child("lfmm")), lf);
  train_cross(cross, random_samples(spec, 16, 2), cfg, {0, 1});
  EXPECT_NE(sha256(cross.child("encoder_x")), ex);
}

TEST(Training, SameSeedSameLoss) {
  const ModelSpec spec = tiny_spec();
  auto run = [&] {
    Network cross = assemble_cross_connected(
        initialized(build_dae_x(spec), 1), initialized(build_dae_y(spec), 2),
        initialized(build_lfmm(latent_x_shape(spec), latent_y_shape(spec), 2), 3), spec);
    TrainingConfig cfg;
    cfg.batch_size = 4;
    return train_cross(cross, random_samples(spec, 12, 3), cfg, {2, 2});
  };
  const CrossLoss a = run(), b = run();
  EXPECT_EQ(a.lfmm, b.lfmm);
  EXPECT_EQ(a.finetune, b.finetune);
}

TEST(Training, PretrainReducesReconstructionLoss) {
  const ModelSpec spec = tiny_spec();
  Network dae = initialized(build_dae_x(spec), 4);
  TrainingConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 40;
  cfg.dropout_prob = 0.0;
  const auto loss = pretrain_dae(dae, random_samples(spec, 16, 4), DaeInput::x, cfg);
  ASSERT_EQ(loss.size(), 40u);
  EXPECT_LT(loss.back(), loss.front());
}

TEST(Checkpoint, PhaseTagsGateAssembly) {
  const ModelSpec spec = tiny_spec();
  ModelCheckpoint x{initialized(build_dae_x(spec), 1), Phase::untrained, spec, {0, 1}, spec.x_shape};
  ModelCheckpoint y{initialized(build_dae_y(spec), 2), Phase::pretrain_y, spec, {0, 1}, spec.y_shape()};
  Network lfmm = initialized(build_lfmm(latent_x_shape(spec), latent_y_shape(spec), 2), 3);
  EXPECT_EQ(error_code([&] { assemble_cross_connected(x, y, lfmm); }), Errc::state);
  EXPECT_NO_THROW(assemble_cross_connected(x, y, lfmm, true));
  x.phase = Phase::pretrain_x;
  EXPECT_NO_THROW(assemble_cross_connected(x, y, lfmm));
  EXPECT_EQ(parse_phase("pretrain-x"), Phase::pretrain_x);
  EXPECT_EQ(to_string(Phase::finetuned), "finetuned");
}

TEST(Checkpoint, RoundTripForwardAgreement) {
  const ModelSpec spec;
  Network cross = assemble_cross_connected(initialized(build_dae_x(spec), 1),
                                           initialized(build_dae_y(spec), 2),
                                           initialized(build_lfmm({8, 2, 64}, {3, 1, 16}, 16), 3),
                                           spec);
  // Move running statistics off their defaults so they are exercised too.
  Rng rng(7);
  cross.forward(oracle::random_tensor({4, 60, 10, 4}, rng, 0, 1), Mode::train);
  const NormalizationParams params{12.5, 77.25};
  const ModelCheckpoint ck{cross, Phase::finetuned, spec, params, spec.x_shape};
  const auto path = std::filesystem::temp_directory_path() / "stsc_model_test.ckpt";
  save_checkpoint(ck, path);
  ModelCheckpoint back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.phase, Phase::finetuned);
  EXPECT_EQ(back.spec, spec);
  EXPECT_EQ(back.params, params);
  EXPECT_EQ(back.input_shape, spec.x_shape);
  const Tensor x = oracle::random_tensor({5, 60, 10, 4}, rng, 0, 1);
  const Tensor a = predict(cross, x, params), b = predict(back.network, x, back.params);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], a[i], 1e-6 * std::abs(a[i]));
}

TEST(Checkpoint, CorruptionErrors) {
  const ModelSpec spec = tiny_spec();
  const ModelCheckpoint ck{initialized(build_dae_y(spec), 1), Phase::pretrain_y, spec, {0, 1},
                           spec.y_shape()};
  const std::string bytes = serialize_checkpoint(ck);
  EXPECT_EQ(bytes.substr(0, 8), "STSC0001");
  EXPECT_NO_THROW(deserialize_checkpoint(bytes));

  std::string version = bytes;
  version[7] = '2';
  EXPECT_EQ(error_code([&] { deserialize_checkpoint(version); }), Errc::version_mismatch);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(error_code([&] { deserialize_checkpoint(magic); }), Errc::parse);
  EXPECT_EQ(error_code([&] { deserialize_checkpoint(bytes.substr(0, 5)); }), Errc::truncated);
  EXPECT_EQ(error_code([&] { deserialize_checkpoint(bytes.substr(0, 40)); }), Errc::truncated);
  EXPECT_EQ(error_code([&] { deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)); }),
            Errc::truncated);
  std::string header = bytes;
  header[12] = '#';
  EXPECT_EQ(error_code([&] { deserialize_checkpoint(header); }), Errc::parse);

  // Same-length edit of one manifest shape.
  std::string shape = bytes;
  const std::size_t at = shape.find("\"shape\":[2]");
  ASSERT_NE(at, std::string::npos);
  shape[at + 9] = '3';
  EXPECT_EQ(error_code([&] { deserialize_checkpoint(shape); }), Errc::shape_mismatch);

  EXPECT_EQ(error_code([] { load_checkpoint("/nonexistent/model.ckpt"); }), Errc::io);
}

#include <json.hpp>

#include "stsc/error.hpp"
#include "stsc/io.hpp"
#include "stsc/model.hpp"

namespace stsc {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "STSC0001";
constexpr std::string_view kMagicPrefix = "STSC";

json extent_json(Extent e) { return json::array({e.h, e.w}); }
Extent extent_from(const json& j) { return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()}; }

json spec_json(const LayerSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"kernel", extent_json(s.kernel)},
          {"stride", extent_json(s.stride)},
          {"padding", extent_json(s.padding)},
          {"output_padding", extent_json(s.output_padding)},
          {"channels_in", s.channels_in},
          {"channels_out", s.channels_out},
          {"activation", to_string(s.activation)},
          {"dropout_prob", s.dropout_prob},
          {"out_hw", extent_json(s.out_hw)}};
}

LayerSpec spec_from(const json& j) {
  LayerSpec s;
  s.kind = parse_layer_kind(j.at("kind").get<std::string>());
  s.kernel = extent_from(j.at("kernel"));
  s.stride = extent_from(j.at("stride"));
  s.padding = extent_from(j.at("padding"));
  s.output_padding = extent_from(j.at("output_padding"));
  s.channels_in = j.at("channels_in").get<std::size_t>();
  s.channels_out = j.at("channels_out").get<std::size_t>();
  s.activation = parse_activation(j.at("activation").get<std::string>());
  s.dropout_prob = j.at("dropout_prob").get<double>();
  s.out_hw = extent_from(j.at("out_hw"));
  return s;
}

json network_json(const Network& net) {
  json layers = json::array();
  for (const auto& e : net.entries()) {
    if (const auto* sub = dynamic_cast<const Network*>(e.layer.get()))
      layers.push_back({{"name", e.name}, {"network", network_json(*sub)}});
    else
      layers.push_back({{"name", e.name}, {"spec", spec_json(e.layer->spec())}});
  }
  return {{"layers", layers}};
}

Network network_from(const json& j) {
  Network net;
  for (const auto& l : j.at("layers")) {
    auto name = l.at("name").get<std::string>();
    if (l.contains("network"))
      net.add(std::move(name), network_from(l.at("network")));
    else
      net.add(std::move(name), make_layer(spec_from(l.at("spec"))));
  }
  return net;
}

json model_spec_json(const ModelSpec& s) {
  return {{"x_shape", s.x_shape},       {"horizon", s.horizon},
          {"x_widths", s.x_widths},     {"residual_blocks", s.residual_blocks},
          {"y_widths", s.y_widths},     {"lfmm_channels", s.lfmm_channels},
          {"dropout", s.dropout}};
}

ModelSpec model_spec_from(const json& j) {
  ModelSpec s;
  s.x_shape = j.at("x_shape").get<Shape>();
  s.horizon = j.at("horizon").get<std::size_t>();
  s.x_widths = j.at("x_widths").get<std::vector<std::size_t>>();
  s.residual_blocks = j.at("residual_blocks").get<std::size_t>();
  s.y_widths = j.at("y_widths").get<std::vector<std::size_t>>();
  s.lfmm_channels = j.at("lfmm_channels").get<std::size_t>();
  s.dropout = j.at("dropout").get<double>();
  return s;
}

}  // namespace

std::string serialize_checkpoint(const ModelCheckpoint& checkpoint) {
  Network net = checkpoint.network;
  json manifest = json::array();
  std::string blob;
  std::size_t offset = 0;
  for (const auto& ref : net.state()) {
    std::vector<float> values(ref.value->values().begin(), ref.value->values().end());
    append_f32_le(blob, values);
    manifest.push_back({{"name", ref.name},
                        {"shape", ref.value->shape()},
                        {"offset", offset},
                        {"count", values.size()}});
    offset += values.size() * 4;
  }
  json header = {{"format", std::string(kMagic)},
                 {"phase", to_string(checkpoint.phase)},
                 {"spec", model_spec_json(checkpoint.spec)},
                 {"input_shape", checkpoint.input_shape},
                 {"normalization", {{"min", checkpoint.params.min}, {"max", checkpoint.params.max}}},
                 {"network", network_json(net)},
                 {"parameters", manifest}};
  const std::string text = header.dump();
  std::string out(kMagic);
  append_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out += blob;
  return out;
}

ModelCheckpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 4) {
    if (bytes.substr(0, std::min(bytes.size(), kMagicPrefix.size())) !=
        kMagicPrefix.substr(0, std::min(bytes.size(), kMagicPrefix.size())))
      throw Error(Errc::parse, "not a checkpoint file");
    throw Error(Errc::truncated, "checkpoint shorter than its preamble");
  }
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    if (bytes.substr(0, kMagicPrefix.size()) == kMagicPrefix)
      throw Error(Errc::version_mismatch,
                  "checkpoint version '" + std::string(bytes.substr(0, kMagic.size())) +
                      "' is not supported (expected " + std::string(kMagic) + ")");
    throw Error(Errc::parse, "not a checkpoint file (bad magic)");
  }
  const std::size_t header_len = read_u32_le(bytes.data() + kMagic.size());
  const std::size_t body = kMagic.size() + 4;
  if (bytes.size() - body < header_len)
    throw Error(Errc::truncated, "checkpoint header is cut short");

  ModelCheckpoint cp;
  json header;
  try {
    header = json::parse(bytes.substr(body, header_len));
    if (header.at("format").get<std::string>() != kMagic)
      throw Error(Errc::version_mismatch, "checkpoint header format mismatch");
    cp.phase = parse_phase(header.at("phase").get<std::string>());
    cp.spec = model_spec_from(header.at("spec"));
    cp.input_shape = header.at("input_shape").get<Shape>();
    cp.params = {header.at("normalization").at("min").get<double>(),
                 header.at("normalization").at("max").get<double>()};
    cp.network = network_from(header.at("network"));
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("checkpoint header: ") + e.what());
  }

  const std::string_view blobs = bytes.substr(body + header_len);
  const json& manifest = header.at("parameters");
  auto state = cp.network.state();
  if (manifest.size() != state.size())
    throw Error(Errc::shape_mismatch, "checkpoint lists " + std::to_string(manifest.size()) +
                                          " tensors, the network has " + std::to_string(state.size()));
  try {
    for (std::size_t i = 0; i < state.size(); ++i) {
      const json& m = manifest[i];
      const auto name = m.at("name").get<std::string>();
      const auto shape = m.at("shape").get<Shape>();
      if (name != state[i].name || shape != state[i].value->shape())
        throw Error(Errc::shape_mismatch, "tensor " + name + " " + shape_str(shape) +
                                              " does not fit " + state[i].name + " " +
                                              shape_str(state[i].value->shape()));
      const auto offset = m.at("offset").get<std::size_t>();
      const auto count = m.at("count").get<std::size_t>();
      if (count != shape_size(shape))
        throw Error(Errc::shape_mismatch, "tensor " + name + " element count disagrees with shape");
      if (offset > blobs.size() || blobs.size() - offset < count * 4)
        throw Error(Errc::truncated, "parameter blob for " + name + " is cut short");
      auto data = state[i].value->data();
      for (std::size_t k = 0; k < count; ++k) data[k] = read_f32_le(blobs.data() + offset + 4 * k);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("checkpoint manifest: ") + e.what());
  }
  return cp;
}

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(checkpoint));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace stsc

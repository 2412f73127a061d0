#include "ctaflow/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ctaflow/errors.hpp"

namespace ctaflow {
namespace {

class Writer {
 public:
  void magic(const char (&tag)[5]) { bytes_.insert(bytes_.end(), tag, tag + 4); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes_.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xffu));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void magic(const char (&tag)[5]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, tag, 4) != 0) {
      throw FormatError(std::string("container: expected section '") + tag + "'");
    }
    pos_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_ + b]) << (8 * b);
    pos_ += 4;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("container: truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kMaxDim = 4096;
constexpr std::uint32_t kMaxLayers = 64;

}  // namespace

std::vector<std::uint8_t> encode_container(const FlowModel& model) {
  model.validate();
  Writer w;
  const VelocityPyramid& pyr = model.pyramid;
  w.magic("CTVF");
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(pyr.levels()));
  w.u32(static_cast<std::uint32_t>(pyr.channels()));
  for (int r = 0; r < pyr.levels(); ++r) {
    const GridDims& d = pyr.level_dims(r);
    w.u32(static_cast<std::uint32_t>(d.nx));
    w.u32(static_cast<std::uint32_t>(d.ny));
    w.u32(static_cast<std::uint32_t>(d.nz));
  }
  for (const VelocityGrid& g : pyr.grids()) {
    for (const Vec3& v : g.values()) {
      w.f32(v.x);
      w.f32(v.y);
      w.f32(v.z);
    }
  }

  const AttentionNet& net = model.net;
  w.magic("ATTN");
  w.u32(static_cast<std::uint32_t>(net.mode()));
  w.f32(net.range().min);
  w.f32(net.range().max);
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const DenseLayer& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.inputs));
    w.u32(static_cast<std::uint32_t>(l.outputs));
  }
  for (const DenseLayer& l : net.layers()) {
    for (double v : l.weight) w.f32(v);
    for (double v : l.bias) w.f32(v);
  }
  return w.take();
}

FlowModel decode_container(std::span<const std::uint8_t> bytes) {
  Reader rd(bytes);
  rd.magic("CTVF");
  const std::uint32_t version = rd.u32();
  if (version != kContainerVersion) throw FormatError("container: unsupported version " + std::to_string(version));
  const std::uint32_t levels = rd.u32();
  const std::uint32_t channels = rd.u32();
  if (levels == 0 || levels > 16 || channels == 0 || channels > 1024) throw FormatError("container: bad R or M");

  std::vector<GridDims> dims(levels);
  for (GridDims& d : dims) {
    const std::uint32_t nx = rd.u32(), ny = rd.u32(), nz = rd.u32();
    if (nx > kMaxDim || ny > kMaxDim || nz > kMaxDim) throw FormatError("container: grid dims out of range");
    d = {static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz)};
  }

  FlowModel model;
  try {
    model.pyramid = VelocityPyramid(static_cast<int>(channels), dims);
  } catch (const SizeError& e) {
    throw FormatError(std::string("container: ") + e.what());
  }
  for (VelocityGrid& g : model.pyramid.grids()) {
    for (Vec3& v : g.values()) {
      v.x = rd.f32();
      v.y = rd.f32();
      v.z = rd.f32();
    }
  }

  rd.magic("ATTN");
  const std::uint32_t mode = rd.u32();
  if (mode > 3) throw FormatError("container: unknown flow mode " + std::to_string(mode));
  ConditionRange range;
  range.min = rd.f32();
  range.max = rd.f32();
  const std::uint32_t layer_count = rd.u32();
  if (layer_count == 0 || layer_count > kMaxLayers) throw FormatError("container: bad layer count");
  std::vector<std::pair<int, int>> shapes(layer_count);
  for (auto& [in, out] : shapes) {
    in = static_cast<int>(rd.u32());
    out = static_cast<int>(rd.u32());
    if (in < 1 || out < 1 || in > 1 << 16 || out > 1 << 16) throw FormatError("container: bad layer shape");
  }
  for (std::size_t l = 1; l < shapes.size(); ++l) {
    if (shapes[l].first != shapes[l - 1].second) throw FormatError("container: layer shapes do not chain");
  }

  AttentionConfig config;
  config.levels = static_cast<int>(levels);
  config.channels = static_cast<int>(channels);
  config.inputs = shapes.front().first;
  config.hidden.clear();
  for (std::size_t l = 0; l + 1 < shapes.size(); ++l) config.hidden.push_back(shapes[l].second);
  config.mode = static_cast<FlowMode>(mode);
  config.range = range;
  if (shapes.back().second != config.levels * config.channels) {
    throw FormatError("container: attention output width does not match R x M");
  }
  try {
    model.net = AttentionNet(config);
  } catch (const Error& e) {
    throw FormatError(std::string("container: ") + e.what());
  }
  for (DenseLayer& l : model.net.layers()) {
    for (double& v : l.weight) v = rd.f32();
    for (double& v : l.bias) v = rd.f32();
  }
  if (!rd.done()) throw FormatError("container: trailing bytes");
  return model;
}

void write_container(const std::filesystem::path& path, const FlowModel& model) {
  const std::vector<std::uint8_t> bytes = encode_container(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

FlowModel read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

nlohmann::json container_sidecar(const FlowModel& model, const nlohmann::json& extra) {
  nlohmann::json j;
  j["format"] = "CTVF";
  j["version"] = kContainerVersion;
  j["levels"] = model.pyramid.levels();
  j["channels"] = model.pyramid.channels();
  nlohmann::json dims = nlohmann::json::array();
  for (int r = 0; r < model.pyramid.levels(); ++r) {
    const GridDims& d = model.pyramid.level_dims(r);
    dims.push_back({d.nx, d.ny, d.nz});
  }
  j["level_dims"] = dims;
  j["value_type"] = "float32_le";
  j["node_order"] = "x_fastest";
  j["mode"] = std::string(to_string(model.net.mode()));
  j["attention_inputs"] = model.net.inputs();
  j["attention_hidden"] = model.net.hidden_widths();
  j["attention_activation"] = "tanh";
  j["condition_range"] = {model.net.range().min, model.net.range().max};
  for (const auto& [key, value] : extra.items()) j[key] = value;
  return j;
}

std::filesystem::path sidecar_path(const std::filesystem::path& container) {
  return std::filesystem::path(container.string() + ".json");
}

void save_model(const std::filesystem::path& path, const FlowModel& model, const nlohmann::json& extra) {
  write_container(path, model);
  std::ofstream side(sidecar_path(path));
  if (!side) throw InputError("cannot write " + sidecar_path(path).string());
  side << container_sidecar(model, extra).dump(2) << '\n';
}

}  // namespace ctaflow

#include "heurplan/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace heurplan {

const WeightEntry& ModelWeights::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::out_of_range("no weight entry named " + name);
}

WeightEntry& ModelWeights::find(const std::string& name) {
  return const_cast<WeightEntry&>(static_cast<const ModelWeights&>(*this).find(name));
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries)
    if (e.trainable) n += e.value.size();
  return n;
}

namespace {

struct NamedLayer {
  LayerDesc desc;
  std::string prefix;  // e.g. "enc0.conv1"
  std::string bn_prefix;
};

std::vector<NamedLayer> describe(const ModelConfig& cfg) {
  std::vector<NamedLayer> layers;
  for (int i = 0; i < 3; ++i) {
    const int in = i == 0 ? cfg.input_channels : cfg.encoder_channels[i - 1];
    const int c = cfg.encoder_channels[i];
    for (int j = 0; j < 3; ++j) {
      NamedLayer l;
      l.desc.spec = {j == 0 ? in : c, c, 3, 3, j == 0 ? 2 : 1, cfg.dilations[j], cfg.dilations[j]};
      l.prefix = "enc" + std::to_string(i) + ".conv" + std::to_string(j);
      l.bn_prefix = "enc" + std::to_string(i) + ".bn" + std::to_string(j);
      layers.push_back(l);
    }
  }
  for (int i = 0; i < 3; ++i) {
    const int in = i == 0 ? cfg.encoder_channels[2] : cfg.decoder_channels[i - 1];
    const int c = cfg.decoder_channels[i];
    for (int j = 0; j < 3; ++j) {
      NamedLayer l;
      const bool last = i == 2 && j == 2;
      if (j == 0) {
        l.desc.transposed = true;
        l.desc.spec = {in, c, 4, 4, 2, 1, 1};
        l.prefix = "dec" + std::to_string(i) + ".deconv0";
      } else {
        l.desc.spec = {c, last ? cfg.output_channels : c, 3, 3, 1, cfg.dilations[j], cfg.dilations[j]};
        l.prefix = "dec" + std::to_string(i) + ".conv" + std::to_string(j);
      }
      l.desc.normalized = !last;
      l.bn_prefix = "dec" + std::to_string(i) + ".bn" + std::to_string(j);
      layers.push_back(l);
    }
  }
  return layers;
}

// Entry names and shapes in file order.
std::vector<WeightEntry> skeleton(const ModelConfig& cfg) {
  std::vector<WeightEntry> entries;
  for (const auto& l : describe(cfg)) {
    const auto& s = l.desc.spec;
    entries.push_back({l.prefix + ".weight",
                       Tensor(l.desc.transposed ? s.deconv_weight_shape() : s.conv_weight_shape()), true});
    entries.push_back({l.prefix + ".bias", Tensor({1, 1, 1, s.out_channels}), true});
    if (l.desc.normalized) {
      const Shape4 vec{1, 1, 1, s.out_channels};
      entries.push_back({l.bn_prefix + ".gamma", Tensor(vec, 1.0), true});
      entries.push_back({l.bn_prefix + ".beta", Tensor(vec, 0.0), true});
      entries.push_back({l.bn_prefix + ".running_mean", Tensor(vec, 0.0), false});
      entries.push_back({l.bn_prefix + ".running_var", Tensor(vec, 1.0), false});
    }
  }
  return entries;
}

std::span<const double> as_span(const Tensor& t) { return {t.data(), t.size()}; }
std::span<double> as_span(Tensor& t) { return {t.data(), t.size()}; }

}  // namespace

std::vector<LayerDesc> layer_layout(const ModelConfig& cfg) {
  std::vector<LayerDesc> out;
  std::size_t k = 0;
  for (auto l : describe(cfg)) {
    l.desc.weight = k++;
    l.desc.bias = k++;
    if (l.desc.normalized) {
      l.desc.gamma = k++;
      l.desc.beta = k++;
      l.desc.running_mean = k++;
      l.desc.running_var = k++;
    }
    out.push_back(l.desc);
  }
  return out;
}

ModelWeights build_model(const ModelConfig& config, std::uint64_t seed) {
  ModelWeights w{config, skeleton(config)};
  std::mt19937_64 rng(seed);
  for (const auto& layer : layer_layout(config)) {
    const auto& s = layer.spec;
    double fan_in = static_cast<double>(s.in_channels) * s.kernel_h * s.kernel_w;
    if (layer.transposed) fan_in /= static_cast<double>(s.stride) * s.stride;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto& x : w.entries[layer.weight].value.values()) x = dist(rng);
  }
  return w;
}

namespace {

void check_input(const ModelConfig& cfg, const Tensor& input) {
  const Shape4& s = input.shape();
  if (s.c != cfg.input_channels)
    throw ShapeError("model input must have " + std::to_string(cfg.input_channels) + " channels, got " +
                     std::to_string(s.c));
  if (s.n <= 0 || s.h <= 0 || s.w <= 0 || s.h % 8 != 0 || s.w % 8 != 0)
    throw ShapeError("model input spatial dims " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                     " must be positive multiples of 8; pad the features (place_features) before calling");
}

}  // namespace

Tensor forward(ModelWeights& weights, const Tensor& input, nn::Mode mode, ForwardCache* cache) {
  check_input(weights.config, input);
  const auto layout = layer_layout(weights.config);
  if (cache) cache->layers.assign(layout.size(), {});
  Tensor x = input;
  for (std::size_t li = 0; li < layout.size(); ++li) {
    const LayerDesc& l = layout[li];
    auto& e = weights.entries;
    Tensor y = l.transposed ? nn::deconv2d_fwd(x, e[l.weight].value, as_span(e[l.bias].value), l.spec)
                            : nn::conv2d_fwd(x, e[l.weight].value, as_span(e[l.bias].value), l.spec);
    if (cache) cache->layers[li].input = std::move(x);
    if (l.normalized) {
      Tensor z = nn::batchnorm_fwd(y, as_span(e[l.gamma].value), as_span(e[l.beta].value),
                                   as_span(e[l.running_mean].value), as_span(e[l.running_var].value), mode,
                                   cache ? &cache->layers[li].bn : nullptr);
      x = nn::leaky_relu_fwd(z);
      if (cache) cache->layers[li].normalized = std::move(z);
    } else {
      x = std::move(y);
    }
  }
  return x;
}

Tensor predict(const ModelWeights& weights, const Tensor& input) {
  // Eval mode reads but never writes the running statistics.
  return forward(const_cast<ModelWeights&>(weights), input, nn::Mode::Eval, nullptr);
}

Gradients backward(const ModelWeights& weights, const ForwardCache& cache, const Tensor& grad_output) {
  const auto layout = layer_layout(weights.config);
  if (cache.layers.size() != layout.size()) throw ShapeError("backward: forward cache does not match the model");
  Gradients g;
  g.entries.resize(weights.entries.size());
  Tensor upstream = grad_output;
  for (std::size_t li = layout.size(); li-- > 0;) {
    const LayerDesc& l = layout[li];
    const LayerCache& lc = cache.layers[li];
    const auto& e = weights.entries;
    if (l.normalized) {
      upstream = nn::leaky_relu_bwd(lc.normalized, upstream);
      auto bn = nn::batchnorm_bwd(lc.bn, as_span(e[l.gamma].value), upstream);
      g.entries[l.gamma] = std::move(bn.grad_gamma);
      g.entries[l.beta] = std::move(bn.grad_beta);
      upstream = std::move(bn.grad_x);
    }
    auto cg = l.transposed ? nn::deconv2d_bwd(lc.input, e[l.weight].value, l.spec, upstream)
                           : nn::conv2d_bwd(lc.input, e[l.weight].value, l.spec, upstream);
    g.entries[l.weight] = std::move(cg.grad_w.values());
    g.entries[l.bias] = std::move(cg.grad_b);
    upstream = std::move(cg.grad_x);
  }
  g.input = std::move(upstream);
  return g;
}

// --- persistence ---------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'H', 'E', 'U', 'R', 'P', 'L', 'A', 'N'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const std::string& what) {
    if (pos_ + sizeof(T) > bytes_.size()) throw WeightFileError("weight file truncated while reading " + what);
    T value;
    char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    std::memcpy(&value, raw, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take(std::size_t n, const std::string& what) {
    if (n > bytes_.size() - pos_) throw WeightFileError("weight file truncated while reading " + what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const ModelWeights& weights) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kWeightFormatVersion);
  put_le<std::uint64_t>(out, weights.entries.size());
  for (const auto& e : weights.entries) {
    put_le<std::uint64_t>(out, e.name.size());
    out += e.name;
    put_le<std::uint64_t>(out, 4);
    const Shape4& s = e.value.shape();
    for (int d : {s.n, s.c, s.h, s.w}) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (double x : e.value.values()) put_le<double>(out, x);
  }
  return out;
}

ModelWeights deserialize(const std::string& bytes, const ModelConfig& config) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic)))
    throw WeightFileError("not a weight file (bad magic)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kWeightFormatVersion)
    throw WeightFileError("unsupported weight file version " + std::to_string(version));
  ModelWeights expected{config, skeleton(config)};
  const auto count = in.get<std::uint64_t>("entry count");
  if (count != expected.entries.size())
    throw WeightFileError("weight file has " + std::to_string(count) + " entries, model expects " +
                          std::to_string(expected.entries.size()));
  for (auto& e : expected.entries) {
    const auto name_len = in.get<std::uint64_t>("name length of " + e.name);
    const std::string name = in.take(name_len, "name of " + e.name);
    if (name != e.name) throw WeightFileError("entry '" + name + "' found where '" + e.name + "' was expected");
    if (in.get<std::uint64_t>("rank of " + name) != 4) throw WeightFileError("entry '" + name + "' is not rank 4");
    std::uint64_t dims[4];
    for (auto& d : dims) d = in.get<std::uint64_t>("dims of " + name);
    const Shape4& s = e.value.shape();
    if (dims[0] != std::uint64_t(s.n) || dims[1] != std::uint64_t(s.c) || dims[2] != std::uint64_t(s.h) ||
        dims[3] != std::uint64_t(s.w))
      throw WeightFileError("shape mismatch for entry '" + name + "': file has (" + std::to_string(dims[0]) + "," +
                            std::to_string(dims[1]) + "," + std::to_string(dims[2]) + "," +
                            std::to_string(dims[3]) + "), model expects " + to_string(s));
    for (auto& x : e.value.values()) x = in.get<double>("data of " + name);
  }
  if (!in.done()) throw WeightFileError("trailing bytes after the last weight entry");
  return expected;
}

void save_weights(const ModelWeights& weights, const std::string& path) {
  const std::string bytes = serialize(weights);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw WeightFileError("cannot open for writing: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw WeightFileError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ModelWeights load_weights(const std::string& path, const ModelConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFileError("cannot open weight file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str(), config);
}

int inference_canvas(int extent) { return (extent + 8 + 7) / 8 * 8; }

Tensor stack_features(const std::vector<FeatureStack>& items) {
  if (items.empty()) throw ShapeError("stack_features: empty batch");
  const int h = items[0].height(), w = items[0].width();
  Tensor t({static_cast<int>(items.size()), kFeatureChannels, h, w});
  for (std::size_t n = 0; n < items.size(); ++n) {
    if (items[n].height() != h || items[n].width() != w) throw ShapeError("stack_features: mixed spatial sizes");
    for (int c = 0; c < kFeatureChannels; ++c) {
      const auto& src = items[n].channels[c].data();
      std::copy(src.begin(), src.end(), t.plane(static_cast<int>(n), c));
    }
  }
  return t;
}

CostField predict_heuristic_map(const ModelWeights& weights, const GridMap& map, Cell goal) {
  const FeatureStack fs = build_features(map, goal);
  const int ch = inference_canvas(map.height()), cw = inference_canvas(map.width());
  const Cell offset{(ch - map.height()) / 2, (cw - map.width()) / 2};
  const Placement placed = place_features(fs, ch, cw, offset);
  const Tensor out = predict(weights, stack_features({placed.features}));
  CostField h(map.height(), map.width());
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c) h(r, c) = out.at(0, 0, r + offset.row, c + offset.col);
  return h;
}

}  // namespace heurplan

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "heurplan/gridworld.hpp"
#include "heurplan/nn.hpp"
#include "heurplan/tensor.hpp"

namespace heurplan {

/// Encoder-decoder fully convolutional network. Each encoder module is three
/// 3x3 convolutions (first one stride 2, dilations 1..3), each followed by
/// batch norm and leaky ReLU. Each decoder module replaces the first
/// convolution by a 4x4 transposed convolution that doubles the resolution.
/// The last convolution emits one raw channel.
struct ModelConfig {
  int input_channels = kFeatureChannels;
  std::array<int, 3> encoder_channels{16, 32, 64};
  std::array<int, 3> decoder_channels{32, 16, 16};
  std::array<int, 3> dilations{1, 2, 3};
  int output_channels = 1;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct WeightEntry {
  std::string name;
  Tensor value;
  bool trainable = true;
};

struct ModelWeights {
  ModelConfig config;
  std::vector<WeightEntry> entries;

  const WeightEntry& find(const std::string& name) const;
  WeightEntry& find(const std::string& name);
  std::size_t parameter_count() const;  // trainable scalars only
};

/// Static description of one network layer and the weight entries it owns.
struct LayerDesc {
  bool transposed = false;
  nn::ConvSpec spec;
  bool normalized = true;  // followed by batch norm + leaky ReLU
  std::size_t weight = 0, bias = 0;
  std::size_t gamma = 0, beta = 0, running_mean = 0, running_var = 0;
};

std::vector<LayerDesc> layer_layout(const ModelConfig& config);

/// Fan-in scaled normal init (std = sqrt(2 / fan_in)), zero biases, unit gamma.
ModelWeights build_model(const ModelConfig& config, std::uint64_t seed);

struct LayerCache {
  Tensor input;
  Tensor normalized;  // batch-norm output, input of the activation
  nn::BatchNormCache bn;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
};

/// Input spatial dims must be divisible by 8. Train mode updates the
/// running batch-norm statistics inside `weights`.
Tensor forward(ModelWeights& weights, const Tensor& input, nn::Mode mode, ForwardCache* cache = nullptr);

/// Eval-mode forward; weights are not modified.
Tensor predict(const ModelWeights& weights, const Tensor& input);

struct Gradients {
  std::vector<std::vector<double>> entries;  // aligned with ModelWeights::entries; empty when not trainable
  Tensor input;
};

Gradients backward(const ModelWeights& weights, const ForwardCache& cache, const Tensor& grad_output);

class WeightFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary container: "HEURPLAN" magic, u32 version, u64 entry count, then per
/// entry: u64 name length, name bytes, u64 rank (4), 4 x u64 dims, raw
/// doubles. All integers and doubles little-endian.
inline constexpr std::uint32_t kWeightFormatVersion = 1;

std::string serialize(const ModelWeights& weights);
ModelWeights deserialize(const std::string& bytes, const ModelConfig& config = {});
/// Writes to a sibling temporary file, then renames over `path`.
void save_weights(const ModelWeights& weights, const std::string& path);
ModelWeights load_weights(const std::string& path, const ModelConfig& config = {});

/// Canvas edge used for single-map inference: extent + 8 rounded up to a multiple of 8.
int inference_canvas(int extent);

Tensor stack_features(const std::vector<FeatureStack>& items);

/// One eval-mode forward over the whole map (centered in the inference
/// canvas), cropped back to map size: the heuristic map for `goal`.
CostField predict_heuristic_map(const ModelWeights& weights, const GridMap& map, Cell goal);

}  // namespace heurplan

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "heurplan/tensor.hpp"

namespace heurplan::nn {

enum class Mode { Train, Eval };

/// Geometry of a (transposed) convolution. Weights are laid out
/// (out_channels, in_channels, kh, kw) for conv2d and
/// (in_channels, out_channels, kh, kw) for deconv2d.
struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  int dilation = 1;
  int padding = 0;

  /// floor((in + 2 pad - dilation (k - 1) - 1) / stride) + 1
  int conv_out_h(int in_h) const;
  int conv_out_w(int in_w) const;
  /// (in - 1) stride - 2 pad + dilation (k - 1) + 1
  int deconv_out_h(int in_h) const;
  int deconv_out_w(int in_w) const;

  Shape4 conv_weight_shape() const { return {out_channels, in_channels, kernel_h, kernel_w}; }
  Shape4 deconv_weight_shape() const { return {in_channels, out_channels, kernel_h, kernel_w}; }
};

struct ConvGrads {
  Tensor grad_x;
  Tensor grad_w;
  std::vector<double> grad_b;
};

/// Cross-correlation with zero padding, stride and dilation.
Tensor conv2d_fwd(const Tensor& x, const Tensor& w, std::span<const double> b, const ConvSpec& spec);
ConvGrads conv2d_bwd(const Tensor& x, const Tensor& w, const ConvSpec& spec, const Tensor& upstream);

/// Transposed convolution: the adjoint of conv2d_fwd (without bias) for the same geometry.
Tensor deconv2d_fwd(const Tensor& x, const Tensor& w, std::span<const double> b, const ConvSpec& spec);
ConvGrads deconv2d_bwd(const Tensor& x, const Tensor& w, const ConvSpec& spec, const Tensor& upstream);

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;  // running = m * running + (1 - m) * batch

struct BatchNormCache {
  Mode mode = Mode::Eval;
  Tensor xhat;
  std::vector<double> inv_std;
};

/// Per-channel normalization over (batch, height, width). Train mode uses
/// batch statistics and updates the running estimates in place.
Tensor batchnorm_fwd(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                     std::span<double> running_mean, std::span<double> running_var, Mode mode,
                     BatchNormCache* cache = nullptr);

struct BatchNormGrads {
  Tensor grad_x;
  std::vector<double> grad_gamma;
  std::vector<double> grad_beta;
};

BatchNormGrads batchnorm_bwd(const BatchNormCache& cache, std::span<const double> gamma, const Tensor& upstream);

inline constexpr double kLeakySlope = 0.01;

Tensor leaky_relu_fwd(const Tensor& x, double slope = kLeakySlope);
Tensor leaky_relu_bwd(const Tensor& x, const Tensor& upstream, double slope = kLeakySlope);

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d loss / d pred
};

/// sum (pred - target)^2 * mask. Cells with mask == 0 are skipped entirely,
/// so non-finite targets there are harmless.
LossResult masked_sq_loss(const Tensor& pred, const Tensor& target, const Tensor& mask);

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

/// One bias-corrected Adam update over a list of parameter buffers.
/// Moments are allocated on the first call.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state);

struct Shift {
  int drow;
  int dcol;
  double cost;
};

/// The 8-connected successor shifts with their edge costs.
std::array<Shift, 8> eight_connected_shifts();

/// out(v) = min over shifts k of (cost_k + x(v + offset_k)), per item and
/// channel; shifts leaving the field contribute +inf.
Tensor shift_min(const Tensor& x, std::span<const Shift> shifts);

}  // namespace heurplan::nn

#include "heurplan/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

// Always take the packed GEMM path: the small-size coefficient path vectorizes
// reductions with alignment-dependent peeling, which makes results vary in the
// last bits with allocation addresses.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Core>

namespace heurplan {

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

}  // namespace heurplan

namespace heurplan::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// Sliding-window geometry from an image (channels x height x width) to an
// output grid (out_h x out_w).
struct Window {
  int channels, height, width;
  int kh, kw, stride, dilation, padding;
  int out_h, out_w;

  int rows() const { return channels * kh * kw; }
  int cols() const { return out_h * out_w; }

  // Output columns [lo, hi) whose input column for kernel tap kj is in range.
  void col_range(int kj, int& lo, int& hi) const {
    const int shift = kj * dilation - padding;  // ix = ox * stride + shift
    lo = std::min(out_w, shift >= 0 ? 0 : (-shift + stride - 1) / stride);
    const int last = width - 1 - shift;  // ox * stride <= last
    hi = last < 0 ? 0 : std::min(out_w, last / stride + 1);
    if (hi < lo) hi = lo;
  }
};

void im2col(const double* image, const Window& g, double* col) {
  const int cols = g.cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.kh; ++ki)
      for (int kj = 0; kj < g.kw; ++kj) {
        double* row = col + static_cast<std::size_t>((c * g.kh + ki) * g.kw + kj) * cols;
        int lo, hi;
        g.col_range(kj, lo, hi);
        const int shift = kj * g.dilation - g.padding;
        for (int oy = 0; oy < g.out_h; ++oy) {
          double* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          const int iy = oy * g.stride - g.padding + ki * g.dilation;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = image + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          std::fill(dst, dst + lo, 0.0);
          if (g.stride == 1) {
            std::copy(src + lo + shift, src + hi + shift, dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride + shift];
          }
          std::fill(dst + hi, dst + g.out_w, 0.0);
        }
      }
}

// Adjoint of im2col: accumulates col entries back into the image.
void col2im(const double* col, const Window& g, double* image) {
  const int cols = g.cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ki = 0; ki < g.kh; ++ki)
      for (int kj = 0; kj < g.kw; ++kj) {
        const double* row = col + static_cast<std::size_t>((c * g.kh + ki) * g.kw + kj) * cols;
        int lo, hi;
        g.col_range(kj, lo, hi);
        const int shift = kj * g.dilation - g.padding;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ki * g.dilation;
          if (iy < 0 || iy >= g.height) continue;
          const double* src = row + static_cast<std::size_t>(oy) * g.out_w;
          double* dst = image + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          for (int ox = lo; ox < hi; ++ox) dst[ox * g.stride + shift] += src[ox];
        }
      }
}

void check(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

Window conv_window(const Shape4& x, const ConvSpec& spec) {
  return {x.c, x.h, x.w, spec.kernel_h, spec.kernel_w, spec.stride, spec.dilation, spec.padding,
          spec.conv_out_h(x.h), spec.conv_out_w(x.w)};
}

// The deconv output is the "image" side of the window; its input is the grid side.
Window deconv_window(const Shape4& x, const ConvSpec& spec) {
  return {spec.out_channels, spec.deconv_out_h(x.h), spec.deconv_out_w(x.w), spec.kernel_h, spec.kernel_w,
          spec.stride, spec.dilation, spec.padding, x.h, x.w};
}

void validate_spec(const ConvSpec& spec) {
  check(spec.in_channels > 0 && spec.out_channels > 0, "conv: channel counts must be positive");
  check(spec.kernel_h > 0 && spec.kernel_w > 0, "conv: kernel must be positive");
  check(spec.stride > 0 && spec.dilation > 0 && spec.padding >= 0, "conv: invalid stride/dilation/padding");
}

}  // namespace

int ConvSpec::conv_out_h(int in_h) const { return (in_h + 2 * padding - dilation * (kernel_h - 1) - 1) / stride + 1; }
int ConvSpec::conv_out_w(int in_w) const { return (in_w + 2 * padding - dilation * (kernel_w - 1) - 1) / stride + 1; }
int ConvSpec::deconv_out_h(int in_h) const { return (in_h - 1) * stride - 2 * padding + dilation * (kernel_h - 1) + 1; }
namespace {

// Sequential row sums into acc (fixed order, independent of alignment).
void accumulate_rows(const double* data, int rows, std::size_t cols, std::vector<double>& acc) {
  for (int r = 0; r < rows; ++r) {
    const double* row = data + static_cast<std::size_t>(r) * cols;
    double s = 0.0;
    for (std::size_t i = 0; i < cols; ++i) s += row[i];
    acc[r] += s;
  }
}

}  // namespace

int ConvSpec::deconv_out_w(int in_w) const { return (in_w - 1) * stride - 2 * padding + dilation * (kernel_w - 1) + 1; }

Tensor conv2d_fwd(const Tensor& x, const Tensor& w, std::span<const double> b, const ConvSpec& spec) {
  validate_spec(spec);
  const Shape4& xs = x.shape();
  check(xs.c == spec.in_channels, "conv2d: input has " + std::to_string(xs.c) + " channels, spec expects " +
                                      std::to_string(spec.in_channels));
  check(w.shape() == spec.conv_weight_shape(), "conv2d: weight shape " + to_string(w.shape()) + " != " +
                                                   to_string(spec.conv_weight_shape()));
  check(b.empty() || static_cast<int>(b.size()) == spec.out_channels, "conv2d: bias length mismatch");
  const Window g = conv_window(xs, spec);
  check(g.out_h > 0 && g.out_w > 0 && xs.h + 2 * spec.padding >= spec.dilation * (spec.kernel_h - 1) + 1 &&
            xs.w + 2 * spec.padding >= spec.dilation * (spec.kernel_w - 1) + 1,
        "conv2d: input too small for kernel");

  Tensor out({xs.n, spec.out_channels, g.out_h, g.out_w});
  std::vector<double> col(static_cast<std::size_t>(g.rows()) * g.cols());
  const ConstMatMap wm(w.data(), spec.out_channels, g.rows());
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.plane(n, 0), g, col.data());
    MatMap om(out.plane(n, 0), spec.out_channels, g.cols());
    om.noalias() = wm * ConstMatMap(col.data(), g.rows(), g.cols());
    if (!b.empty())
      for (int o = 0; o < spec.out_channels; ++o) om.row(o).array() += b[o];
  }
  return out;
}

ConvGrads conv2d_bwd(const Tensor& x, const Tensor& w, const ConvSpec& spec, const Tensor& upstream) {
  validate_spec(spec);
  const Shape4& xs = x.shape();
  check(xs.c == spec.in_channels, "conv2d_bwd: input channel mismatch");
  check(w.shape() == spec.conv_weight_shape(), "conv2d_bwd: weight shape mismatch");
  const Window g = conv_window(xs, spec);
  check(upstream.shape() == Shape4{xs.n, spec.out_channels, g.out_h, g.out_w},
        "conv2d_bwd: upstream gradient shape " + to_string(upstream.shape()) + " does not match forward output");

  ConvGrads grads{Tensor(xs), Tensor(w.shape()), std::vector<double>(spec.out_channels, 0.0)};
  std::vector<double> col(static_cast<std::size_t>(g.rows()) * g.cols());
  std::vector<double> dcol(col.size());
  const ConstMatMap wm(w.data(), spec.out_channels, g.rows());
  MatMap gw(grads.grad_w.data(), spec.out_channels, g.rows());
  for (int n = 0; n < xs.n; ++n) {
    const ConstMatMap dout(upstream.plane(n, 0), spec.out_channels, g.cols());
    im2col(x.plane(n, 0), g, col.data());
    gw.noalias() += dout * ConstMatMap(col.data(), g.rows(), g.cols()).transpose();
    MatMap(dcol.data(), g.rows(), g.cols()).noalias() = wm.transpose() * dout;
    col2im(dcol.data(), g, grads.grad_x.plane(n, 0));
    accumulate_rows(upstream.plane(n, 0), spec.out_channels, static_cast<std::size_t>(upstream.shape().plane()),
                    grads.grad_b);
  }
  return grads;
}

Tensor deconv2d_fwd(const Tensor& x, const Tensor& w, std::span<const double> b, const ConvSpec& spec) {
  validate_spec(spec);
  const Shape4& xs = x.shape();
  check(xs.c == spec.in_channels, "deconv2d: input channel mismatch");
  check(w.shape() == spec.deconv_weight_shape(), "deconv2d: weight shape " + to_string(w.shape()) + " != " +
                                                     to_string(spec.deconv_weight_shape()));
  check(b.empty() || static_cast<int>(b.size()) == spec.out_channels, "deconv2d: bias length mismatch");
  const Window g = deconv_window(xs, spec);
  check(g.height > 0 && g.width > 0 && spec.conv_out_h(g.height) == xs.h && spec.conv_out_w(g.width) == xs.w,
        "deconv2d: geometry is not invertible for this input size");

  Tensor out({xs.n, spec.out_channels, g.height, g.width});
  std::vector<double> col(static_cast<std::size_t>(g.rows()) * g.cols());
  const ConstMatMap wm(w.data(), spec.in_channels, g.rows());
  for (int n = 0; n < xs.n; ++n) {
    MatMap(col.data(), g.rows(), g.cols()).noalias() =
        wm.transpose() * ConstMatMap(x.plane(n, 0), spec.in_channels, g.cols());
    col2im(col.data(), g, out.plane(n, 0));
    if (!b.empty()) {
      MatMap om(out.plane(n, 0), spec.out_channels, static_cast<Eigen::Index>(g.height) * g.width);
      for (int o = 0; o < spec.out_channels; ++o) om.row(o).array() += b[o];
    }
  }
  return out;
}

ConvGrads deconv2d_bwd(const Tensor& x, const Tensor& w, const ConvSpec& spec, const Tensor& upstream) {
  validate_spec(spec);
  const Shape4& xs = x.shape();
  check(xs.c == spec.in_channels, "deconv2d_bwd: input channel mismatch");
  check(w.shape() == spec.deconv_weight_shape(), "deconv2d_bwd: weight shape mismatch");
  const Window g = deconv_window(xs, spec);
  check(upstream.shape() == Shape4{xs.n, spec.out_channels, g.height, g.width},
        "deconv2d_bwd: upstream gradient shape does not match forward output");

  ConvGrads grads{Tensor(xs), Tensor(w.shape()), std::vector<double>(spec.out_channels, 0.0)};
  std::vector<double> dcol(static_cast<std::size_t>(g.rows()) * g.cols());
  const ConstMatMap wm(w.data(), spec.in_channels, g.rows());
  MatMap gw(grads.grad_w.data(), spec.in_channels, g.rows());
  for (int n = 0; n < xs.n; ++n) {
    im2col(upstream.plane(n, 0), g, dcol.data());
    const ConstMatMap dc(dcol.data(), g.rows(), g.cols());
    const ConstMatMap xm(x.plane(n, 0), spec.in_channels, g.cols());
    MatMap(grads.grad_x.plane(n, 0), spec.in_channels, g.cols()).noalias() = wm * dc;
    gw.noalias() += xm * dc.transpose();
    accumulate_rows(upstream.plane(n, 0), spec.out_channels, static_cast<std::size_t>(upstream.shape().plane()),
                    grads.grad_b);
  }
  return grads;
}

Tensor batchnorm_fwd(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                     std::span<double> running_mean, std::span<double> running_var, Mode mode,
                     BatchNormCache* cache) {
  const Shape4& s = x.shape();
  const auto channels = static_cast<std::size_t>(s.c);
  check(gamma.size() == channels && beta.size() == channels && running_mean.size() == channels &&
            running_var.size() == channels,
        "batchnorm: parameter length does not match channel count");
  if (mode == Mode::Train) check(s.n > 0 && s.plane() > 0, "batchnorm: empty batch in train mode");

  Tensor out(s);
  Tensor xhat(s);
  std::vector<double> inv_std(channels);
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n) * static_cast<double>(plane);
  for (int c = 0; c < s.c; ++c) {
    double mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      mean = sum / count;
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / count;
      const double unbiased = count > 1 ? sq / (count - 1) : var;
      running_mean[c] = kBatchNormMomentum * running_mean[c] + (1.0 - kBatchNormMomentum) * mean;
      running_var[c] = kBatchNormMomentum * running_var[c] + (1.0 - kBatchNormMomentum) * unbiased;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + kBatchNormEps);
    inv_std[c] = is;
    for (int n = 0; n < s.n; ++n) {
      const double* p = x.plane(n, c);
      double* xh = xhat.plane(n, c);
      double* o = out.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (p[i] - mean) * is;
        o[i] = gamma[c] * xh[i] + beta[c];
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

BatchNormGrads batchnorm_bwd(const BatchNormCache& cache, std::span<const double> gamma, const Tensor& upstream) {
  const Shape4& s = cache.xhat.shape();
  check(upstream.shape() == s, "batchnorm_bwd: upstream shape mismatch");
  check(gamma.size() == static_cast<std::size_t>(s.c), "batchnorm_bwd: gamma length mismatch");
  BatchNormGrads g{Tensor(s), std::vector<double>(s.c, 0.0), std::vector<double>(s.c, 0.0)};
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n) * static_cast<double>(plane);
  for (int c = 0; c < s.c; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const double* dy = upstream.plane(n, c);
      const double* xh = cache.xhat.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xh[i];
      }
    }
    g.grad_beta[c] = sum_dy;
    g.grad_gamma[c] = sum_dy_xhat;
    const double scale = gamma[c] * cache.inv_std[c];
    for (int n = 0; n < s.n; ++n) {
      const double* dy = upstream.plane(n, c);
      const double* xh = cache.xhat.plane(n, c);
      double* dx = g.grad_x.plane(n, c);
      if (cache.mode == Mode::Train) {
        for (std::size_t i = 0; i < plane; ++i)
          dx[i] = scale * (dy[i] - sum_dy / count - xh[i] * sum_dy_xhat / count);
      } else {
        for (std::size_t i = 0; i < plane; ++i) dx[i] = scale * dy[i];
      }
    }
  }
  return g;
}

Tensor leaky_relu_fwd(const Tensor& x, double slope) {
  Tensor out(x.shape());
  const double* in = x.data();
  double* o = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : slope * in[i];
  return out;
}

Tensor leaky_relu_bwd(const Tensor& x, const Tensor& upstream, double slope) {
  check(x.shape() == upstream.shape(), "leaky_relu_bwd: shape mismatch");
  Tensor out(x.shape());
  const double* in = x.data();
  const double* dy = upstream.data();
  double* o = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = in[i] > 0.0 ? dy[i] : slope * dy[i];
  return out;
}

LossResult masked_sq_loss(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  check(pred.shape() == target.shape() && pred.shape() == mask.shape(),
        "masked_sq_loss: pred " + to_string(pred.shape()) + ", target " + to_string(target.shape()) + ", mask " +
            to_string(mask.shape()) + " must match");
  LossResult r{0.0, Tensor(pred.shape())};
  const double* p = pred.data();
  const double* t = target.data();
  const double* m = mask.data();
  double* gr = r.grad.data();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (m[i] == 0.0) continue;
    const double d = p[i] - t[i];
    r.value += d * d * m[i];
    gr[i] = 2.0 * d * m[i];
  }
  return r;
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
      state.m[k].assign(params[k].size(), 0.0);
      state.v[k].assign(params[k].size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match parameter list");
  ++state.t;
  const auto& cfg = state.config;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (g.size() != p.size() || m.size() != p.size())
      throw ShapeError("adam_step: gradient " + std::to_string(k) + " does not match its parameter");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      p[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

std::array<Shift, 8> eight_connected_shifts() {
  constexpr double d = 1.41421356237309504880;
  return {{{-1, 0, 1.0}, {1, 0, 1.0}, {0, -1, 1.0}, {0, 1, 1.0}, {-1, -1, d}, {-1, 1, d}, {1, -1, d}, {1, 1, d}}};
}

Tensor shift_min(const Tensor& x, std::span<const Shift> shifts) {
  const Shape4& s = x.shape();
  Tensor out(s, std::numeric_limits<double>::infinity());
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const double* in = x.plane(n, c);
      double* o = out.plane(n, c);
      for (const Shift& sh : shifts) {
        const int r0 = std::max(0, -sh.drow), r1 = std::min(s.h, s.h - sh.drow);
        const int c0 = std::max(0, -sh.dcol), c1 = std::min(s.w, s.w - sh.dcol);
        for (int r = r0; r < r1; ++r) {
          const double* src = in + static_cast<std::size_t>(r + sh.drow) * s.w + sh.dcol;
          double* dst = o + static_cast<std::size_t>(r) * s.w;
          for (int col = c0; col < c1; ++col) dst[col] = std::min(dst[col], sh.cost + src[col]);
        }
      }
    }
  return out;
}

}  // namespace heurplan::nn

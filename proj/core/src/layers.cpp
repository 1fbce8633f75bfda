#include "stsc/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "stsc/error.hpp"
#include "stsc/network.hpp"
#include "stsc/optim.hpp"

namespace stsc {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using RowVecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstRowVecMap = Eigen::Map<const Eigen::RowVectorXd>;

// Kernel window mapping between a "big" spatial grid and a "small" grid:
// small (i, j) with tap (a, b) touches big (i*sh - ph + a, j*sw - pw + b).
// Convolution reads big=input and writes small=output; the transposed
// convolution is the same mapping run in reverse.
struct Window {
  std::size_t big_h, big_w, small_h, small_w;
  std::size_t kh, kw, sh, sw, ph, pw, channels;

  std::size_t row_width() const { return kh * kw * channels; }
};

void im2col(const double* big, std::size_t batch, const Window& g, double* cols) {
  const std::size_t width = g.row_width();
  for (std::size_t n = 0; n < batch; ++n) {
    const double* img = big + n * g.big_h * g.big_w * g.channels;
    for (std::size_t i = 0; i < g.small_h; ++i) {
      for (std::size_t j = 0; j < g.small_w; ++j) {
        double* row = cols + ((n * g.small_h + i) * g.small_w + j) * width;
        for (std::size_t a = 0; a < g.kh; ++a) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * g.sh + a) -
                                   static_cast<std::ptrdiff_t>(g.ph);
          for (std::size_t b = 0; b < g.kw; ++b) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j * g.sw + b) -
                                     static_cast<std::ptrdiff_t>(g.pw);
            double* dst = row + (a * g.kw + b) * g.channels;
            if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(g.big_h) ||
                x >= static_cast<std::ptrdiff_t>(g.big_w)) {
              std::fill(dst, dst + g.channels, 0.0);
            } else {
              const double* src = img + (static_cast<std::size_t>(y) * g.big_w +
                                         static_cast<std::size_t>(x)) * g.channels;
              std::copy(src, src + g.channels, dst);
            }
          }
        }
      }
    }
  }
}

// Scatter-add of im2col rows back onto the big grid.
void col2im(const double* cols, std::size_t batch, const Window& g, double* big) {
  const std::size_t width = g.row_width();
  for (std::size_t n = 0; n < batch; ++n) {
    double* img = big + n * g.big_h * g.big_w * g.channels;
    for (std::size_t i = 0; i < g.small_h; ++i) {
      for (std::size_t j = 0; j < g.small_w; ++j) {
        const double* row = cols + ((n * g.small_h + i) * g.small_w + j) * width;
        for (std::size_t a = 0; a < g.kh; ++a) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * g.sh + a) -
                                   static_cast<std::ptrdiff_t>(g.ph);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.big_h)) continue;
          for (std::size_t b = 0; b < g.kw; ++b) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j * g.sw + b) -
                                     static_cast<std::ptrdiff_t>(g.pw);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.big_w)) continue;
            const double* src = row + (a * g.kw + b) * g.channels;
            double* dst = img + (static_cast<std::size_t>(y) * g.big_w +
                                 static_cast<std::size_t>(x)) * g.channels;
            for (std::size_t c = 0; c < g.channels; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

void require_rank4(const Tensor& x, std::string_view who) {
  if (x.rank() != 4)
    throw Error(Errc::dimension, std::string(who) + " expects an NHWC batch, got " +
                                     shape_str(x.shape()));
}

void require_channels(const Shape& in, std::size_t channels, std::string_view who) {
  if (in.size() != 3 || in[2] != channels)
    throw Error(Errc::dimension, std::string(who) + " expects " + std::to_string(channels) +
                                     " channels, got " + shape_str(in));
}

Shape sample_shape(const Tensor& batch) {
  return Shape(batch.shape().begin() + 1, batch.shape().end());
}

Shape batched(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

void require_cache(bool cached, std::string_view who) {
  if (!cached)
    throw Error(Errc::state, std::string(who) + ": backward without a matching forward");
}

void require_grad_shape(const Tensor& grad, const Shape& expected, std::string_view who) {
  if (grad.shape() != expected)
    throw Error(Errc::dimension, std::string(who) + ": gradient shape " +
                                     shape_str(grad.shape()) + " != " + shape_str(expected));
}

double apply(Activation act, double v) {
  switch (act) {
    case Activation::tanh: return std::tanh(v);
    case Activation::relu: return v > 0.0 ? v : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-v));
    case Activation::linear: return v;
  }
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Names and specs

std::string_view to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::transposed_conv: return "transposed-conv";
    case LayerKind::batch_norm: return "batch-norm";
    case LayerKind::activation: return "activation";
    case LayerKind::avg_pool: return "avg-pool";
    case LayerKind::upsample: return "upsample";
    case LayerKind::dropout: return "dropout";
    case LayerKind::dense: return "dense";
    case LayerKind::flatten: return "flatten";
    case LayerKind::residual_block: return "residual-block";
    case LayerKind::sequential: return "sequential";
  }
  return "unknown";
}

std::string_view to_string(Activation act) noexcept {
  switch (act) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (auto k : {LayerKind::conv, LayerKind::transposed_conv, LayerKind::batch_norm,
                 LayerKind::activation, LayerKind::avg_pool, LayerKind::upsample,
                 LayerKind::dropout, LayerKind::dense, LayerKind::flatten,
                 LayerKind::residual_block, LayerKind::sequential}) {
    if (to_string(k) == name) return k;
  }
  throw Error(Errc::config, "unknown layer kind '" + std::string(name) + "'");
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::tanh, Activation::relu, Activation::sigmoid, Activation::linear}) {
    if (to_string(a) == name) return a;
  }
  throw Error(Errc::config, "unknown activation '" + std::string(name) + "'");
}

void LayerSpec::validate() const {
  if (kernel.h < 1 || kernel.w < 1 || stride.h < 1 || stride.w < 1)
    throw Error(Errc::config, std::string(to_string(kind)) + ": kernel and stride must be >= 1");
  if (kind == LayerKind::transposed_conv &&
      (output_padding.h >= stride.h || output_padding.w >= stride.w))
    throw Error(Errc::config, "transposed-conv: output padding must be smaller than stride");
  if (kind == LayerKind::dropout && !(dropout_prob >= 0.0 && dropout_prob < 1.0))
    throw Error(Errc::config, "dropout probability must lie in [0, 1)");
  const bool needs_channels = kind == LayerKind::conv || kind == LayerKind::transposed_conv ||
                              kind == LayerKind::dense || kind == LayerKind::residual_block;
  if (needs_channels && (channels_in == 0 || channels_out == 0))
    throw Error(Errc::config, std::string(to_string(kind)) + ": channel counts must be >= 1");
  if (kind == LayerKind::batch_norm && channels_in == 0)
    throw Error(Errc::config, "batch-norm: channel count must be >= 1");
  if (kind == LayerKind::residual_block && channels_in != channels_out)
    throw Error(Errc::config, "residual-block: input and output channels must match");
}

LayerSpec LayerSpec::conv(std::size_t cin, std::size_t cout, Extent kernel, Extent stride,
                          Extent padding) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.channels_in = cin;
  s.channels_out = cout;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::transposed_conv(std::size_t cin, std::size_t cout, Extent kernel,
                                     Extent stride, Extent padding, Extent output_padding) {
  LayerSpec s = conv(cin, cout, kernel, stride, padding);
  s.kind = LayerKind::transposed_conv;
  s.output_padding = output_padding;
  return s;
}

LayerSpec LayerSpec::batch_norm(std::size_t channels) {
  LayerSpec s;
  s.kind = LayerKind::batch_norm;
  s.channels_in = s.channels_out = channels;
  return s;
}

LayerSpec LayerSpec::activation_layer(Activation act) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::avg_pool(Extent window) {
  LayerSpec s;
  s.kind = LayerKind::avg_pool;
  s.kernel = s.stride = window;
  return s;
}

LayerSpec LayerSpec::upsample(Extent scale) {
  LayerSpec s;
  s.kind = LayerKind::upsample;
  s.kernel = s.stride = scale;
  return s;
}

LayerSpec LayerSpec::dropout(double prob) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.dropout_prob = prob;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, Extent out_hw) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.channels_in = in;
  s.channels_out = out;
  s.out_hw = out_hw;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

LayerSpec LayerSpec::residual_block(std::size_t channels) {
  LayerSpec s;
  s.kind = LayerKind::residual_block;
  s.channels_in = s.channels_out = channels;
  s.kernel = {3, 3};
  s.padding = {1, 1};
  return s;
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::conv: return std::make_unique<Conv2d>(spec);
    case LayerKind::transposed_conv: return std::make_unique<ConvTranspose2d>(spec);
    case LayerKind::batch_norm: return std::make_unique<BatchNorm>(spec);
    case LayerKind::activation: return std::make_unique<ActivationLayer>(spec);
    case LayerKind::avg_pool: return std::make_unique<AvgPool2d>(spec);
    case LayerKind::upsample: return std::make_unique<Upsample2d>(spec);
    case LayerKind::dropout: return std::make_unique<Dropout>(spec);
    case LayerKind::dense: return std::make_unique<Dense>(spec);
    case LayerKind::flatten: return std::make_unique<Flatten>(spec);
    case LayerKind::residual_block: return std::make_unique<ResidualBlock>(spec);
    case LayerKind::sequential: return std::make_unique<Network>();
  }
  throw Error(Errc::config, "unhandled layer kind");
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(const LayerSpec& spec)
    : Layer(spec),
      weight_({spec.kernel.h, spec.kernel.w, spec.channels_in, spec.channels_out}),
      bias_({spec.channels_out}),
      weight_grad_(weight_.shape()),
      bias_grad_(bias_.shape()) {}

Shape Conv2d::output_shape(const Shape& in) const {
  require_channels(in, spec_.channels_in, "conv");
  return {conv_out_size(in[0], spec_.kernel.h, spec_.stride.h, spec_.padding.h),
          conv_out_size(in[1], spec_.kernel.w, spec_.stride.w, spec_.padding.w),
          spec_.channels_out};
}

Tensor Conv2d::forward(const Tensor& x, Mode) {
  require_rank4(x, "conv");
  in_shape_ = sample_shape(x);
  const Shape out = output_shape(in_shape_);
  const std::size_t n = x.dim(0);
  const Window g{in_shape_[0], in_shape_[1], out[0], out[1], spec_.kernel.h, spec_.kernel.w,
                 spec_.stride.h, spec_.stride.w, spec_.padding.h, spec_.padding.w,
                 spec_.channels_in};
  const std::size_t rows = n * out[0] * out[1];
  cols_ = Tensor({rows, g.row_width()});
  im2col(x.raw(), n, g, cols_.raw());

  Tensor y(batched(n, out));
  MatMap ym(y.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(out[2]));
  ConstMatMap cm(cols_.raw(), static_cast<Eigen::Index>(rows),
                 static_cast<Eigen::Index>(g.row_width()));
  ConstMatMap wm(weight_.raw(), static_cast<Eigen::Index>(g.row_width()),
                 static_cast<Eigen::Index>(out[2]));
  ym.noalias() = cm * wm;
  ym.rowwise() += ConstRowVecMap(bias_.raw(), static_cast<Eigen::Index>(out[2]));
  cached_ = true;
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  require_cache(cached_, "conv");
  const Shape out = output_shape(in_shape_);
  const std::size_t n = cols_.dim(0) / (out[0] * out[1]);
  require_grad_shape(grad_out, batched(n, out), "conv");
  const Window g{in_shape_[0], in_shape_[1], out[0], out[1], spec_.kernel.h, spec_.kernel.w,
                 spec_.stride.h, spec_.stride.w, spec_.padding.h, spec_.padding.w,
                 spec_.channels_in};
  const auto rows = static_cast<Eigen::Index>(cols_.dim(0));
  const auto width = static_cast<Eigen::Index>(g.row_width());
  const auto cout = static_cast<Eigen::Index>(out[2]);
  ConstMatMap gm(grad_out.raw(), rows, cout);
  ConstMatMap cm(cols_.raw(), rows, width);
  if (!frozen_) {
    MatMap(weight_grad_.raw(), width, cout).noalias() += cm.transpose() * gm;
    RowVecMap(bias_grad_.raw(), cout) += gm.colwise().sum();
  }
  Tensor dcols({cols_.dim(0), g.row_width()});
  ConstMatMap wm(weight_.raw(), width, cout);
  MatMap(dcols.raw(), rows, width).noalias() = gm * wm.transpose();
  Tensor dx(batched(n, in_shape_));
  col2im(dcols.raw(), n, g, dx.raw());
  cached_ = false;
  cols_ = Tensor();
  return dx;
}

void Conv2d::initialize(Rng& rng) {
  const std::size_t taps = spec_.kernel.h * spec_.kernel.w;
  weight_ = xavier_init(taps * spec_.channels_in, taps * spec_.channels_out, weight_.shape(), rng);
  bias_.fill(0.0);
}

void Conv2d::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  out.push_back({prefix + "weight", &weight_, &weight_grad_, frozen_});
  out.push_back({prefix + "bias", &bias_, &bias_grad_, frozen_});
}

void Conv2d::zero_grad() {
  weight_grad_.fill(0.0);
  bias_grad_.fill(0.0);
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(const LayerSpec& spec)
    : Layer(spec),
      weight_({spec.channels_in, spec.kernel.h, spec.kernel.w, spec.channels_out}),
      bias_({spec.channels_out}),
      weight_grad_(weight_.shape()),
      bias_grad_(bias_.shape()) {}

Shape ConvTranspose2d::output_shape(const Shape& in) const {
  require_channels(in, spec_.channels_in, "transposed-conv");
  return {transposed_out_size(in[0], spec_.kernel.h, spec_.stride.h, spec_.padding.h,
                              spec_.output_padding.h),
          transposed_out_size(in[1], spec_.kernel.w, spec_.stride.w, spec_.padding.w,
                              spec_.output_padding.w),
          spec_.channels_out};
}

Tensor ConvTranspose2d::forward(const Tensor& x, Mode) {
  require_rank4(x, "transposed-conv");
  const Shape in = sample_shape(x);
  const Shape out = output_shape(in);
  const std::size_t n = x.dim(0);
  const Window g{out[0], out[1], in[0], in[1], spec_.kernel.h, spec_.kernel.w, spec_.stride.h,
                 spec_.stride.w, spec_.padding.h, spec_.padding.w, spec_.channels_out};
  const auto rows = static_cast<Eigen::Index>(n * in[0] * in[1]);
  const auto cin = static_cast<Eigen::Index>(in[2]);
  const auto width = static_cast<Eigen::Index>(g.row_width());
  Tensor cols({static_cast<std::size_t>(rows), g.row_width()});
  MatMap(cols.raw(), rows, width).noalias() =
      ConstMatMap(x.raw(), rows, cin) * ConstMatMap(weight_.raw(), cin, width);
  Tensor y(batched(n, out));
  col2im(cols.raw(), n, g, y.raw());
  MatMap ym(y.raw(), static_cast<Eigen::Index>(n * out[0] * out[1]),
            static_cast<Eigen::Index>(out[2]));
  ym.rowwise() += ConstRowVecMap(bias_.raw(), static_cast<Eigen::Index>(out[2]));
  input_ = x;
  cached_ = true;
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out) {
  require_cache(cached_, "transposed-conv");
  const Shape in = sample_shape(input_);
  const Shape out = output_shape(in);
  const std::size_t n = input_.dim(0);
  require_grad_shape(grad_out, batched(n, out), "transposed-conv");
  const Window g{out[0], out[1], in[0], in[1], spec_.kernel.h, spec_.kernel.w, spec_.stride.h,
                 spec_.stride.w, spec_.padding.h, spec_.padding.w, spec_.channels_out};
  const auto rows = static_cast<Eigen::Index>(n * in[0] * in[1]);
  const auto cin = static_cast<Eigen::Index>(in[2]);
  const auto width = static_cast<Eigen::Index>(g.row_width());
  const auto cout = static_cast<Eigen::Index>(out[2]);

  Tensor dcols({static_cast<std::size_t>(rows), g.row_width()});
  im2col(grad_out.raw(), n, g, dcols.raw());
  ConstMatMap dc(dcols.raw(), rows, width);
  ConstMatMap xm(input_.raw(), rows, cin);
  if (!frozen_) {
    MatMap(weight_grad_.raw(), cin, width).noalias() += xm.transpose() * dc;
    RowVecMap(bias_grad_.raw(), cout) +=
        ConstMatMap(grad_out.raw(), static_cast<Eigen::Index>(n * out[0] * out[1]), cout)
            .colwise()
            .sum();
  }
  Tensor dx(input_.shape());
  MatMap(dx.raw(), rows, cin).noalias() = dc * ConstMatMap(weight_.raw(), cin, width).transpose();
  cached_ = false;
  input_ = Tensor();
  return dx;
}

void ConvTranspose2d::initialize(Rng& rng) {
  const std::size_t taps = spec_.kernel.h * spec_.kernel.w;
  weight_ = xavier_init(taps * spec_.channels_in, taps * spec_.channels_out, weight_.shape(), rng);
  bias_.fill(0.0);
}

void ConvTranspose2d::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  out.push_back({prefix + "weight", &weight_, &weight_grad_, frozen_});
  out.push_back({prefix + "bias", &bias_, &bias_grad_, frozen_});
}

void ConvTranspose2d::zero_grad() {
  weight_grad_.fill(0.0);
  bias_grad_.fill(0.0);
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(const LayerSpec& spec)
    : Layer(spec),
      gamma_({spec.channels_in}, 1.0),
      beta_({spec.channels_in}, 0.0),
      gamma_grad_({spec.channels_in}),
      beta_grad_({spec.channels_in}),
      running_mean_({spec.channels_in}, 0.0),
      running_var_({spec.channels_in}, 1.0) {}

Shape BatchNorm::output_shape(const Shape& in) const {
  require_channels(in, spec_.channels_in, "batch-norm");
  return in;
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  require_rank4(x, "batch-norm");
  output_shape(sample_shape(x));
  const std::size_t c = spec_.channels_in;
  const std::size_t m = x.size() / c;
  batch_stats_ = mode == Mode::train && !frozen_;
  if (batch_stats_ && x.dim(0) < 2)
    throw Error(Errc::batch_too_small, "batch-norm in train mode needs at least 2 samples, got " +
                                           std::to_string(x.dim(0)));

  std::vector<double> mean(c, 0.0), var(c, 0.0);
  if (batch_stats_) {
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t k = 0; k < c; ++k) mean[k] += x[r * c + k];
    for (auto& v : mean) v /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t k = 0; k < c; ++k) {
        const double d = x[r * c + k] - mean[k];
        var[k] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(m);
    for (std::size_t k = 0; k < c; ++k) {
      running_mean_[k] = (1.0 - kMomentum) * running_mean_[k] + kMomentum * mean[k];
      running_var_[k] = (1.0 - kMomentum) * running_var_[k] + kMomentum * var[k];
    }
  } else {
    for (std::size_t k = 0; k < c; ++k) {
      mean[k] = running_mean_[k];
      var[k] = running_var_[k];
    }
  }

  inv_std_.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) inv_std_[k] = 1.0 / std::sqrt(var[k] + kEpsilon);
  xhat_ = Tensor(x.shape());
  Tensor y(x.shape());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t i = r * c + k;
      xhat_[i] = (x[i] - mean[k]) * inv_std_[k];
      y[i] = gamma_[k] * xhat_[i] + beta_[k];
    }
  cached_ = true;
  return y;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
  require_cache(cached_, "batch-norm");
  require_grad_shape(grad_out, xhat_.shape(), "batch-norm");
  const std::size_t c = spec_.channels_in;
  const std::size_t m = xhat_.size() / c;
  std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t i = r * c + k;
      sum_dy[k] += grad_out[i];
      sum_dy_xhat[k] += grad_out[i] * xhat_[i];
    }
  if (!frozen_) {
    for (std::size_t k = 0; k < c; ++k) {
      gamma_grad_[k] += sum_dy_xhat[k];
      beta_grad_[k] += sum_dy[k];
    }
  }
  Tensor dx(xhat_.shape());
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t i = r * c + k;
      if (batch_stats_) {
        dx[i] = gamma_[k] * inv_std_[k] *
                (grad_out[i] - inv_m * sum_dy[k] - xhat_[i] * inv_m * sum_dy_xhat[k]);
      } else {
        dx[i] = gamma_[k] * inv_std_[k] * grad_out[i];
      }
    }
  cached_ = false;
  xhat_ = Tensor();
  return dx;
}

void BatchNorm::initialize(Rng&) {
  gamma_.fill(1.0);
  beta_.fill(0.0);
  running_mean_.fill(0.0);
  running_var_.fill(1.0);
}

void BatchNorm::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  out.push_back({prefix + "scale", &gamma_, &gamma_grad_, frozen_});
  out.push_back({prefix + "shift", &beta_, &beta_grad_, frozen_});
  out.push_back({prefix + "running_mean", &running_mean_, nullptr, frozen_});
  out.push_back({prefix + "running_var", &running_var_, nullptr, frozen_});
}

void BatchNorm::zero_grad() {
  gamma_grad_.fill(0.0);
  beta_grad_.fill(0.0);
}

// ---------------------------------------------------------------------------
// Activation

Tensor pointwise_activation(const Tensor& x, Activation act) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = apply(act, x[i]);
  return y;
}

Tensor ActivationLayer::forward(const Tensor& x, Mode) {
  output_ = pointwise_activation(x, spec_.activation);
  if (spec_.activation == Activation::relu) input_ = x;
  cached_ = true;
  return output_;
}

Tensor ActivationLayer::backward(const Tensor& grad_out) {
  require_cache(cached_, "activation");
  require_grad_shape(grad_out, output_.shape(), "activation");
  Tensor dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const double y = output_[i];
    switch (spec_.activation) {
      case Activation::tanh: dx[i] = grad_out[i] * (1.0 - y * y); break;
      case Activation::relu: dx[i] = input_[i] > 0.0 ? grad_out[i] : 0.0; break;
      case Activation::sigmoid: dx[i] = grad_out[i] * y * (1.0 - y); break;
      case Activation::linear: dx[i] = grad_out[i]; break;
    }
  }
  cached_ = false;
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling and upsampling

AvgPool2d::AvgPool2d(const LayerSpec& spec) : Layer(spec) {}

Shape AvgPool2d::output_shape(const Shape& in) const {
  if (in.size() != 3 || in[0] % spec_.kernel.h != 0 || in[1] % spec_.kernel.w != 0)
    throw Error(Errc::dimension, "avg-pool window " + std::to_string(spec_.kernel.h) + "x" +
                                     std::to_string(spec_.kernel.w) + " does not divide " +
                                     shape_str(in));
  return {in[0] / spec_.kernel.h, in[1] / spec_.kernel.w, in[2]};
}

Tensor AvgPool2d::forward(const Tensor& x, Mode) {
  require_rank4(x, "avg-pool");
  in_shape_ = sample_shape(x);
  const Shape out = output_shape(in_shape_);
  const std::size_t n = x.dim(0), kh = spec_.kernel.h, kw = spec_.kernel.w, c = out[2];
  const double scale = 1.0 / static_cast<double>(kh * kw);
  Tensor y(batched(n, out));
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < in_shape_[0]; ++i)
      for (std::size_t j = 0; j < in_shape_[1]; ++j)
        for (std::size_t k = 0; k < c; ++k) y.at(b, i / kh, j / kw, k) += scale * x.at(b, i, j, k);
  cached_ = true;
  return y;
}

Tensor AvgPool2d::backward(const Tensor& grad_out) {
  require_cache(cached_, "avg-pool");
  const std::size_t n = grad_out.dim(0), kh = spec_.kernel.h, kw = spec_.kernel.w;
  require_grad_shape(grad_out, batched(n, output_shape(in_shape_)), "avg-pool");
  const double scale = 1.0 / static_cast<double>(kh * kw);
  Tensor dx(batched(n, in_shape_));
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < in_shape_[0]; ++i)
      for (std::size_t j = 0; j < in_shape_[1]; ++j)
        for (std::size_t k = 0; k < in_shape_[2]; ++k)
          dx.at(b, i, j, k) = scale * grad_out.at(b, i / kh, j / kw, k);
  cached_ = false;
  return dx;
}

Upsample2d::Upsample2d(const LayerSpec& spec) : Layer(spec) {}

Shape Upsample2d::output_shape(const Shape& in) const {
  if (in.size() != 3) throw Error(Errc::dimension, "upsample expects HxWxC, got " + shape_str(in));
  return {in[0] * spec_.kernel.h, in[1] * spec_.kernel.w, in[2]};
}

Tensor Upsample2d::forward(const Tensor& x, Mode) {
  require_rank4(x, "upsample");
  in_shape_ = sample_shape(x);
  const Shape out = output_shape(in_shape_);
  const std::size_t n = x.dim(0), sh = spec_.kernel.h, sw = spec_.kernel.w;
  Tensor y(batched(n, out));
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < out[0]; ++i)
      for (std::size_t j = 0; j < out[1]; ++j)
        for (std::size_t k = 0; k < out[2]; ++k) y.at(b, i, j, k) = x.at(b, i / sh, j / sw, k);
  cached_ = true;
  return y;
}

Tensor Upsample2d::backward(const Tensor& grad_out) {
  require_cache(cached_, "upsample");
  const Shape out = output_shape(in_shape_);
  const std::size_t n = grad_out.dim(0), sh = spec_.kernel.h, sw = spec_.kernel.w;
  require_grad_shape(grad_out, batched(n, out), "upsample");
  Tensor dx(batched(n, in_shape_));
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < out[0]; ++i)
      for (std::size_t j = 0; j < out[1]; ++j)
        for (std::size_t k = 0; k < out[2]; ++k)
          dx.at(b, i / sh, j / sw, k) += grad_out.at(b, i, j, k);
  cached_ = false;
  return dx;
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(const LayerSpec& spec) : Layer(spec) {}

void Dropout::initialize(Rng& rng) { rng_.seed(rng()); }

Tensor Dropout::forward(const Tensor& x, Mode mode) {
  const double p = spec_.dropout_prob;
  if (mode == Mode::eval || p == 0.0) {
    mask_ = Tensor(x.shape(), 1.0);
  } else if (!(hold_mask_ && mask_.shape() == x.shape())) {
    mask_ = Tensor(x.shape());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < mask_.size(); ++i) mask_[i] = unit(rng_) >= p ? keep_scale : 0.0;
  }
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask_[i];
  cached_ = true;
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  require_cache(cached_, "dropout");
  require_grad_shape(grad_out, mask_.shape(), "dropout");
  Tensor dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_out[i] * mask_[i];
  cached_ = false;
  return dx;
}

// ---------------------------------------------------------------------------
// Dense and flatten

Dense::Dense(const LayerSpec& spec)
    : Layer(spec),
      weight_({spec.channels_out * spec.out_hw.h * spec.out_hw.w, spec.channels_in}),
      bias_({spec.channels_out * spec.out_hw.h * spec.out_hw.w}),
      weight_grad_(weight_.shape()),
      bias_grad_(bias_.shape()) {}

Shape Dense::output_shape(const Shape& in) const {
  if (shape_size(in) != spec_.channels_in)
    throw Error(Errc::dimension, "dense expects " + std::to_string(spec_.channels_in) +
                                     " inputs, got " + shape_str(in));
  return {spec_.out_hw.h, spec_.out_hw.w, spec_.channels_out};
}

Tensor Dense::forward(const Tensor& x, Mode) {
  if (x.rank() < 2) throw Error(Errc::dimension, "dense expects a batch tensor");
  in_shape_ = sample_shape(x);
  const Shape out = output_shape(in_shape_);
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const auto in = static_cast<Eigen::Index>(spec_.channels_in);
  const auto units = static_cast<Eigen::Index>(weight_.dim(0));
  Tensor y(batched(x.dim(0), out));
  MatMap ym(y.raw(), n, units);
  ym.noalias() = ConstMatMap(x.raw(), n, in) * ConstMatMap(weight_.raw(), units, in).transpose();
  ym.rowwise() += ConstRowVecMap(bias_.raw(), units);
  input_ = x;
  cached_ = true;
  return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
  require_cache(cached_, "dense");
  const auto n = static_cast<Eigen::Index>(input_.dim(0));
  const auto in = static_cast<Eigen::Index>(spec_.channels_in);
  const auto units = static_cast<Eigen::Index>(weight_.dim(0));
  if (grad_out.size() != static_cast<std::size_t>(n * units))
    throw Error(Errc::dimension, "dense: gradient size mismatch");
  ConstMatMap gm(grad_out.raw(), n, units);
  if (!frozen_) {
    MatMap(weight_grad_.raw(), units, in).noalias() +=
        gm.transpose() * ConstMatMap(input_.raw(), n, in);
    RowVecMap(bias_grad_.raw(), units) += gm.colwise().sum();
  }
  Tensor dx(input_.shape());
  MatMap(dx.raw(), n, in).noalias() = gm * ConstMatMap(weight_.raw(), units, in);
  cached_ = false;
  input_ = Tensor();
  return dx;
}

void Dense::initialize(Rng& rng) {
  weight_ = xavier_init(weight_.dim(1), weight_.dim(0), weight_.shape(), rng);
  bias_.fill(0.0);
}

void Dense::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  out.push_back({prefix + "weight", &weight_, &weight_grad_, frozen_});
  out.push_back({prefix + "bias", &bias_, &bias_grad_, frozen_});
}

void Dense::zero_grad() {
  weight_grad_.fill(0.0);
  bias_grad_.fill(0.0);
}

Tensor Flatten::forward(const Tensor& x, Mode) {
  if (x.rank() < 2) throw Error(Errc::dimension, "flatten expects a batch tensor");
  in_shape_ = sample_shape(x);
  cached_ = true;
  return x.reshaped(batched(x.dim(0), output_shape(in_shape_)));
}

Tensor Flatten::backward(const Tensor& grad_out) {
  require_cache(cached_, "flatten");
  cached_ = false;
  return grad_out.reshaped(batched(grad_out.dim(0), in_shape_));
}

// ---------------------------------------------------------------------------
// ResidualBlock

ResidualBlock::ResidualBlock(const LayerSpec& spec) : Layer(spec) {
  const std::size_t c = spec.channels_in;
  parts_.push_back(make_layer(LayerSpec::conv(c, c, {3, 3}, {1, 1}, {1, 1})));
  parts_.push_back(make_layer(LayerSpec::batch_norm(c)));
  parts_.push_back(make_layer(LayerSpec::activation_layer(Activation::relu)));
  parts_.push_back(make_layer(LayerSpec::conv(c, c, {3, 3}, {1, 1}, {1, 1})));
  parts_.push_back(make_layer(LayerSpec::batch_norm(c)));
}

ResidualBlock::ResidualBlock(const ResidualBlock& other)
    : Layer(other), output_(other.output_), cached_(other.cached_) {
  for (const auto& p : other.parts_) parts_.push_back(p->clone());
}

Shape ResidualBlock::output_shape(const Shape& in) const {
  require_channels(in, spec_.channels_in, "residual-block");
  return in;
}

Tensor ResidualBlock::forward(const Tensor& x, Mode mode) {
  require_rank4(x, "residual-block");
  output_shape(sample_shape(x));
  Tensor h = x;
  for (auto& p : parts_) h = p->forward(h, mode);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double v = h[i] + x[i];
    h[i] = v > 0.0 ? v : 0.0;
  }
  output_ = h;
  cached_ = true;
  return h;
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
  require_cache(cached_, "residual-block");
  require_grad_shape(grad_out, output_.shape(), "residual-block");
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = output_[i] > 0.0 ? grad_out[i] : 0.0;
  Tensor main = g;
  for (auto it = parts_.rbegin(); it != parts_.rend(); ++it) main = (*it)->backward(main);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += main[i];
  cached_ = false;
  return g;
}

void ResidualBlock::initialize(Rng& rng) {
  for (auto& p : parts_) p->initialize(rng);
}

void ResidualBlock::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  static constexpr const char* kNames[] = {"conv1.", "bn1.", "relu.", "conv2.", "bn2."};
  for (std::size_t i = 0; i < parts_.size(); ++i)
    parts_[i]->collect_state(prefix + kNames[i], out);
}

void ResidualBlock::zero_grad() {
  for (auto& p : parts_) p->zero_grad();
}

void ResidualBlock::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& p : parts_) p->set_frozen(frozen);
}

}  // namespace stsc

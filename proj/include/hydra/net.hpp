#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hydra/tensor.hpp"

namespace hydra {

enum class LayerKind { Dense, Conv2d, ResidualBlock, DenseBlock, Dropout, Relu, Flatten };

inline std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::ResidualBlock: return "residual_block";
    case LayerKind::DenseBlock: return "dense_block";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

/// Declarative description of one layer. Only the fields relevant to the
/// kind are meaningful; the rest stay at their defaults.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  Index units = 0;         // Dense: output width
  Index out_channels = 0;  // Conv2d
  Index kernel = 0;        // Conv2d / ResidualBlock / DenseBlock (odd)
  Index stride = 1;        // Conv2d
  Index block_layers = 0;  // DenseBlock: number of internal layers
  Index growth = 0;        // DenseBlock: channels added per internal layer
  double rate = 0.0;       // Dropout: drop probability in [0,1)

  static LayerSpec dense(Index units) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.units = units;
    return s;
  }
  static LayerSpec conv2d(Index out_channels, Index kernel, Index stride = 1) {
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.out_channels = out_channels;
    s.kernel = kernel;
    s.stride = stride;
    return s;
  }
  static LayerSpec residual_block(Index kernel) {
    LayerSpec s;
    s.kind = LayerKind::ResidualBlock;
    s.kernel = kernel;
    return s;
  }
  static LayerSpec dense_block(Index block_layers, Index growth, Index kernel) {
    LayerSpec s;
    s.kind = LayerKind::DenseBlock;
    s.block_layers = block_layers;
    s.growth = growth;
    s.kernel = kernel;
    return s;
  }
  static LayerSpec dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.rate = rate;
    return s;
  }
  static LayerSpec relu() {
    LayerSpec s;
    s.kind = LayerKind::Relu;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
  }
};

/// Shapes resolved while binding a LayerSpec chain to a concrete input.
struct BoundLayer {
  std::vector<Index> in_shape;
  std::vector<Index> out_shape;
  Index pad = 0;                 // conv-style layers
  Index channels = 0;            // ResidualBlock / DenseBlock input channels
  Index dense_in = 0;            // Dense: input width including metadata
  bool concat_metadata = false;  // true on the first dense layer when metadata_width > 0
};

template <typename Scalar>
using ParamSetT = std::vector<std::vector<TensorT<Scalar>>>;

/// A bound feed-forward network: specs, resolved shapes and parameters.
///
/// Networks are immutable during forward/backward; training steps replace
/// parameters through adam_step only.
template <typename Scalar>
struct NetworkT {
  std::vector<LayerSpec> layers;
  std::vector<BoundLayer> bound;
  ParamSetT<Scalar> params;
  std::vector<Index> input_shape;  // {h, w, c}
  Index metadata_width = 0;
  Index class_count = 0;
  VectorT<Scalar> metadata_means;  // preprocessing constants shipped with the model

  Index parameter_count() const {
    Index n = 0;
    for (const auto& layer : params)
      for (const auto& p : layer) n += p.size();
    return n;
  }
};

using Network = NetworkT<Real>;
using ParamSet = ParamSetT<Real>;

template <typename Scalar>
struct LayerTraceT {
  TensorT<Scalar> input;
  std::vector<MatrixT<Scalar>> cols;  // im2col caches, one per internal conv
  std::vector<TensorT<Scalar>> pre;   // pre-activation caches inside blocks
  TensorT<Scalar> mask;               // dropout mask (already scaled)
  TensorT<Scalar> dense_in;           // dense input after metadata concat
};

template <typename Scalar>
struct ForwardTraceT {
  std::vector<LayerTraceT<Scalar>> layers;
  VectorT<Scalar> scores;
};

namespace detail {

inline std::string layer_label(std::size_t idx, LayerKind kind) {
  return "layer " + std::to_string(idx) + " (" + layer_kind_name(kind) + ")";
}

template <typename Scalar>
void require_finite(const TensorT<Scalar>& t, const std::string& where) {
  if (!t.all_finite()) throw DivergenceError(where + ": non-finite values");
}

// Unrolls k x k receptive fields into rows; zero padding outside the image.
template <typename Scalar>
MatrixT<Scalar> im2col(const TensorT<Scalar>& in, Index k, Index stride, Index pad) {
  const Index h = in.dim(0), w = in.dim(1), c = in.dim(2);
  const Index oh = (h + 2 * pad - k) / stride + 1;
  const Index ow = (w + 2 * pad - k) / stride + 1;
  MatrixT<Scalar> cols = MatrixT<Scalar>::Zero(oh * ow, k * k * c);
  for (Index oy = 0; oy < oh; ++oy)
    for (Index ox = 0; ox < ow; ++ox) {
      const Index row = oy * ow + ox;
      for (Index dy = 0; dy < k; ++dy) {
        const Index iy = oy * stride + dy - pad;
        if (iy < 0 || iy >= h) continue;
        for (Index dx = 0; dx < k; ++dx) {
          const Index ix = ox * stride + dx - pad;
          if (ix < 0 || ix >= w) continue;
          const Index col0 = (dy * k + dx) * c;
          for (Index ch = 0; ch < c; ++ch) cols(row, col0 + ch) = in.at(iy, ix, ch);
        }
      }
    }
  return cols;
}

// Scatter-add of column gradients back onto the input image.
template <typename Scalar>
TensorT<Scalar> col2im_add(const MatrixT<Scalar>& dcols, std::vector<Index> in_shape, Index k,
                           Index stride, Index pad) {
  TensorT<Scalar> dx(std::move(in_shape));
  const Index h = dx.dim(0), w = dx.dim(1), c = dx.dim(2);
  const Index oh = (h + 2 * pad - k) / stride + 1;
  const Index ow = (w + 2 * pad - k) / stride + 1;
  for (Index oy = 0; oy < oh; ++oy)
    for (Index ox = 0; ox < ow; ++ox) {
      const Index row = oy * ow + ox;
      for (Index dy = 0; dy < k; ++dy) {
        const Index iy = oy * stride + dy - pad;
        if (iy < 0 || iy >= h) continue;
        for (Index dx_ = 0; dx_ < k; ++dx_) {
          const Index ix = ox * stride + dx_ - pad;
          if (ix < 0 || ix >= w) continue;
          const Index col0 = (dy * k + dx_) * c;
          for (Index ch = 0; ch < c; ++ch) dx.at(iy, ix, ch) += dcols(row, col0 + ch);
        }
      }
    }
  return dx;
}

// y = conv(x, kernel) + bias, stride/pad as given. cols receives the im2col cache.
template <typename Scalar>
TensorT<Scalar> conv_apply(const TensorT<Scalar>& in, const TensorT<Scalar>& kernel,
                           const TensorT<Scalar>& bias, Index stride, Index pad,
                           MatrixT<Scalar>* cols_out) {
  const Index k = kernel.dim(0), cin = kernel.dim(2), cout = kernel.dim(3);
  const Index h = in.dim(0), w = in.dim(1);
  const Index oh = (h + 2 * pad - k) / stride + 1;
  const Index ow = (w + 2 * pad - k) / stride + 1;
  MatrixT<Scalar> cols = im2col(in, k, stride, pad);
  Eigen::Map<const MatrixT<Scalar>> weights(kernel.data().data(), k * k * cin, cout);
  MatrixT<Scalar> out = cols * weights;
  out.rowwise() += bias.data().transpose();
  TensorT<Scalar> y({oh, ow, cout});
  Eigen::Map<MatrixT<Scalar>>(y.data().data(), oh * ow, cout) = out;
  if (cols_out) *cols_out = std::move(cols);
  return y;
}

// Gradients through a convolution given the cached im2col matrix.
template <typename Scalar>
void conv_backward(const TensorT<Scalar>& dout, const MatrixT<Scalar>& cols,
                   const TensorT<Scalar>& kernel, Index stride, Index pad,
                   const std::vector<Index>& in_shape, TensorT<Scalar>& dkernel,
                   TensorT<Scalar>& dbias, TensorT<Scalar>* dinput) {
  const Index k = kernel.dim(0), cin = kernel.dim(2), cout = kernel.dim(3);
  const Index n = dout.dim(0) * dout.dim(1);
  Eigen::Map<const MatrixT<Scalar>> doutm(dout.data().data(), n, cout);
  dkernel = TensorT<Scalar>(kernel.shape());
  Eigen::Map<MatrixT<Scalar>>(dkernel.data().data(), k * k * cin, cout) =
      cols.transpose() * doutm;
  dbias = TensorT<Scalar>(std::vector<Index>{cout});
  dbias.data() = doutm.colwise().sum().transpose();
  if (dinput) {
    Eigen::Map<const MatrixT<Scalar>> weights(kernel.data().data(), k * k * cin, cout);
    MatrixT<Scalar> dcols = doutm * weights.transpose();
    *dinput = col2im_add(dcols, in_shape, k, stride, pad);
  }
}

template <typename Scalar>
TensorT<Scalar> relu_apply(const TensorT<Scalar>& in) {
  return TensorT<Scalar>(in.shape(), in.data().cwiseMax(Scalar(0)));
}

template <typename Scalar>
TensorT<Scalar> relu_backward(const TensorT<Scalar>& dout, const TensorT<Scalar>& pre) {
  TensorT<Scalar> dx(pre.shape());
  dx.data() = dout.data().array() * (pre.data().array() > Scalar(0)).template cast<Scalar>();
  return dx;
}

template <typename Scalar>
TensorT<Scalar> slice_channels(const TensorT<Scalar>& t, Index from, Index count) {
  TensorT<Scalar> out({t.dim(0), t.dim(1), count});
  for (Index r = 0; r < t.dim(0); ++r)
    for (Index c = 0; c < t.dim(1); ++c)
      for (Index ch = 0; ch < count; ++ch) out.at(r, c, ch) = t.at(r, c, from + ch);
  return out;
}

}  // namespace detail

/// Binds a layer chain to an input shape, validating size consistency and
/// allocating seeded He-initialized parameters. Biases start at zero.
template <typename Scalar>
NetworkT<Scalar> build_network(std::vector<LayerSpec> specs, std::vector<Index> input_shape,
                               Index metadata_width, Index class_count, std::uint64_t seed) {
  if (input_shape.size() != 3) throw ContractError("build_network: input shape must be HxWxC");
  if (class_count <= 0) throw ContractError("build_network: class_count must be positive");
  if (metadata_width < 0) throw ContractError("build_network: metadata_width must be >= 0");

  NetworkT<Scalar> net;
  net.layers = std::move(specs);
  net.input_shape = input_shape;
  net.metadata_width = metadata_width;
  net.class_count = class_count;
  net.metadata_means = VectorT<Scalar>::Zero(metadata_width);

  std::vector<Index> cur = input_shape;
  bool metadata_pending = metadata_width > 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& spec = net.layers[i];
    const std::string label = detail::layer_label(i, spec.kind);
    BoundLayer b;
    b.in_shape = cur;
    std::vector<TensorT<Scalar>> params;
    switch (spec.kind) {
      case LayerKind::Dense: {
        if (cur.size() != 1)
          throw ContractError(label + ": dense requires a flat input (add flatten first)");
        if (spec.units <= 0) throw ContractError(label + ": units must be positive");
        b.concat_metadata = metadata_pending;
        metadata_pending = false;
        b.dense_in = cur[0] + (b.concat_metadata ? metadata_width : 0);
        params.push_back(TensorT<Scalar>({spec.units, b.dense_in}));
        params.push_back(TensorT<Scalar>({spec.units}));
        cur = {spec.units};
        break;
      }
      case LayerKind::Conv2d: {
        if (cur.size() != 3) throw ContractError(label + ": conv2d requires an HxWxC input");
        if (spec.kernel <= 0 || spec.kernel % 2 == 0)
          throw ContractError(label + ": kernel must be odd and positive");
        if (spec.out_channels <= 0) throw ContractError(label + ": out_channels must be positive");
        if (spec.stride < 1) throw ContractError(label + ": stride must be >= 1");
        b.pad = spec.kernel / 2;
        const Index oh = (cur[0] + 2 * b.pad - spec.kernel) / spec.stride + 1;
        const Index ow = (cur[1] + 2 * b.pad - spec.kernel) / spec.stride + 1;
        if (oh <= 0 || ow <= 0) throw ContractError(label + ": output collapses to zero size");
        params.push_back(TensorT<Scalar>({spec.kernel, spec.kernel, cur[2], spec.out_channels}));
        params.push_back(TensorT<Scalar>({spec.out_channels}));
        cur = {oh, ow, spec.out_channels};
        break;
      }
      case LayerKind::ResidualBlock: {
        if (cur.size() != 3) throw ContractError(label + ": residual block requires an HxWxC input");
        if (spec.kernel <= 0 || spec.kernel % 2 == 0)
          throw ContractError(label + ": kernel must be odd and positive");
        b.pad = spec.kernel / 2;
        b.channels = cur[2];
        params.push_back(TensorT<Scalar>({spec.kernel, spec.kernel, b.channels, b.channels}));
        params.push_back(TensorT<Scalar>({b.channels}));
        params.push_back(TensorT<Scalar>({spec.kernel, spec.kernel, b.channels, b.channels}));
        params.push_back(TensorT<Scalar>({b.channels}));
        break;
      }
      case LayerKind::DenseBlock: {
        if (cur.size() != 3) throw ContractError(label + ": dense block requires an HxWxC input");
        if (spec.block_layers < 0) throw ContractError(label + ": block_layers must be >= 0");
        if (spec.block_layers > 0 && (spec.kernel <= 0 || spec.kernel % 2 == 0))
          throw ContractError(label + ": kernel must be odd and positive");
        if (spec.block_layers > 0 && spec.growth <= 0)
          throw ContractError(label + ": growth must be positive");
        b.pad = spec.kernel / 2;
        b.channels = cur[2];
        for (Index l = 0; l < spec.block_layers; ++l) {
          const Index cin = b.channels + l * spec.growth;
          params.push_back(TensorT<Scalar>({spec.kernel, spec.kernel, cin, spec.growth}));
          params.push_back(TensorT<Scalar>({spec.growth}));
        }
        cur = {cur[0], cur[1], b.channels + spec.block_layers * spec.growth};
        break;
      }
      case LayerKind::Dropout: {
        if (spec.rate < 0.0 || spec.rate >= 1.0)
          throw ContractError(label + ": dropout rate must be in [0, 1)");
        break;
      }
      case LayerKind::Relu:
        break;
      case LayerKind::Flatten: {
        cur = {TensorT<Scalar>::count(cur)};
        break;
      }
    }
    b.out_shape = cur;
    net.bound.push_back(std::move(b));
    net.params.push_back(std::move(params));
  }

  if (cur.size() != 1 || cur[0] != class_count)
    throw ContractError("build_network: final layer must emit " + std::to_string(class_count) +
                        " scores, got " + std::to_string(TensorT<Scalar>::count(cur)));

  // Seeded He init for weights; biases stay zero. Each parameter draws from
  // its own derived stream so layer order changes do not shift the others.
  // Residual blocks keep their second conv at zero, so every block starts
  // as the identity and the stack trains stably from scratch.
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    for (std::size_t p = 0; p < net.params[i].size(); ++p) {
      TensorT<Scalar>& t = net.params[i][p];
      if (t.rank() == 1) continue;  // bias
      if (net.layers[i].kind == LayerKind::ResidualBlock && p == 2) continue;
      Rng rng(mix_seed({seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(p)}));
      const Index fan_in = t.rank() == 2 ? t.dim(1) : t.dim(0) * t.dim(1) * t.dim(2);
      he_init(t, fan_in, rng);
    }
  }
  return net;
}

/// Runs the network on one sample, returning raw per-class scores.
///
/// With train_mode off, dropout is the identity and the result is a pure
/// deterministic function of the inputs. With train_mode on, dropout masks
/// derive from rng_seed and the layer index only.
template <typename Scalar>
VectorT<Scalar> forward(const NetworkT<Scalar>& net, const TensorT<Scalar>& pixels,
                        const TensorT<Scalar>& metadata, bool train_mode, std::uint64_t rng_seed,
                        ForwardTraceT<Scalar>* trace = nullptr) {
  if (pixels.shape() != net.input_shape)
    throw ContractError("forward: input pixels " + pixels.shape_str() + " do not match network input");
  if (metadata.size() != net.metadata_width)
    throw ContractError("forward: metadata width " + std::to_string(metadata.size()) +
                        " != " + std::to_string(net.metadata_width));
  detail::require_finite(pixels, "forward input");
  detail::require_finite(metadata, "forward metadata");

  if (trace) {
    trace->layers.clear();
    trace->layers.resize(net.layers.size());
  }

  TensorT<Scalar> cur = pixels;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& spec = net.layers[i];
    const BoundLayer& b = net.bound[i];
    const std::string label = detail::layer_label(i, spec.kind);
    if (cur.shape() != b.in_shape)
      throw ContractError(label + ": got input " + cur.shape_str());
    LayerTraceT<Scalar>* lt = trace ? &trace->layers[i] : nullptr;
    if (lt) lt->input = cur;

    switch (spec.kind) {
      case LayerKind::Dense: {
        TensorT<Scalar> xin = cur;
        if (b.concat_metadata) {
          xin = TensorT<Scalar>({b.dense_in});
          xin.data().head(cur.size()) = cur.data();
          xin.data().tail(net.metadata_width) = metadata.data();
        }
        const TensorT<Scalar>& w = net.params[i][0];
        const TensorT<Scalar>& bias = net.params[i][1];
        Eigen::Map<const MatrixT<Scalar>> wm(w.data().data(), spec.units, b.dense_in);
        TensorT<Scalar> y({spec.units});
        y.data() = wm * xin.data() + bias.data();
        if (lt) lt->dense_in = std::move(xin);
        cur = std::move(y);
        break;
      }
      case LayerKind::Conv2d: {
        MatrixT<Scalar> cols;
        cur = detail::conv_apply(cur, net.params[i][0], net.params[i][1], spec.stride, b.pad,
                                 lt ? &cols : nullptr);
        if (lt) lt->cols.push_back(std::move(cols));
        break;
      }
      case LayerKind::ResidualBlock: {
        MatrixT<Scalar> cols1, cols2;
        TensorT<Scalar> a = detail::conv_apply(cur, net.params[i][0], net.params[i][1], Index{1},
                                               b.pad, lt ? &cols1 : nullptr);
        TensorT<Scalar> r = detail::relu_apply(a);
        TensorT<Scalar> f = detail::conv_apply(r, net.params[i][2], net.params[i][3], Index{1},
                                               b.pad, lt ? &cols2 : nullptr);
        if (!f.same_shape(cur)) throw ContractError(label + ": F changed the input shape");
        if (lt) {
          lt->cols.push_back(std::move(cols1));
          lt->cols.push_back(std::move(cols2));
          lt->pre.push_back(std::move(a));
        }
        cur = cur + f;
        break;
      }
      case LayerKind::DenseBlock: {
        TensorT<Scalar> cat = cur;
        for (Index l = 0; l < spec.block_layers; ++l) {
          MatrixT<Scalar> cols;
          TensorT<Scalar> a =
              detail::conv_apply(cat, net.params[i][2 * l], net.params[i][2 * l + 1], Index{1},
                                 b.pad, lt ? &cols : nullptr);
          TensorT<Scalar> y = detail::relu_apply(a);
          if (lt) {
            lt->cols.push_back(std::move(cols));
            lt->pre.push_back(std::move(a));
          }
          cat = concat_channels(cat, y);
        }
        if (cat.dim(2) != b.channels + spec.block_layers * spec.growth)
          throw ContractError(label + ": channel bookkeeping mismatch");
        cur = std::move(cat);
        break;
      }
      case LayerKind::Dropout: {
        if (train_mode && spec.rate > 0.0) {
          Rng rng(mix_seed({rng_seed, 0xd509b1a5ULL, static_cast<std::uint64_t>(i)}));
          TensorT<Scalar> mask(cur.shape());
          const Scalar keep_scale = Scalar(1.0 / (1.0 - spec.rate));
          for (Index j = 0; j < mask.size(); ++j)
            mask[j] = rng.uniform() < spec.rate ? Scalar(0) : keep_scale;
          cur.data().array() *= mask.data().array();
          if (lt) lt->mask = std::move(mask);
        }
        break;
      }
      case LayerKind::Relu:
        cur = detail::relu_apply(cur);
        break;
      case LayerKind::Flatten:
        cur = cur.reshaped({cur.size()});
        break;
    }
    detail::require_finite(cur, label);
  }

  VectorT<Scalar> scores = cur.data();
  if (trace) trace->scores = scores;
  return scores;
}

/// Weighted softmax cross-entropy, stabilized by max subtraction.
template <typename Scalar>
Scalar softmax_cross_entropy(const VectorT<Scalar>& scores, Index target, Scalar class_weight) {
  if (!scores.allFinite()) throw DivergenceError("softmax_cross_entropy: non-finite scores");
  if (target < 0 || target >= scores.size())
    throw ContractError("softmax_cross_entropy: target out of range");
  const Scalar m = scores.maxCoeff();
  const Scalar lse = std::log((scores.array() - m).exp().sum());
  return class_weight * (lse - (scores[target] - m));
}

template <typename Scalar>
struct BackwardResultT {
  Scalar loss = 0;
  VectorT<Scalar> scores;
  ParamSetT<Scalar> grads;
};

/// Reverse-mode gradients of the weighted softmax cross-entropy loss with
/// respect to every network parameter.
template <typename Scalar>
BackwardResultT<Scalar> backward(const NetworkT<Scalar>& net, const TensorT<Scalar>& pixels,
                                 const TensorT<Scalar>& metadata, Index target,
                                 const VectorT<Scalar>& class_weights, bool train_mode = true,
                                 std::uint64_t rng_seed = 0) {
  if (target < 0 || target >= net.class_count)
    throw ContractError("backward: target label out of range");
  if (class_weights.size() != net.class_count)
    throw ContractError("backward: class_weights length mismatch");

  ForwardTraceT<Scalar> trace;
  BackwardResultT<Scalar> result;
  result.scores = forward(net, pixels, metadata, train_mode, rng_seed, &trace);
  const Scalar weight = class_weights[target];
  result.loss = softmax_cross_entropy(result.scores, target, weight);

  result.grads.resize(net.params.size());
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    result.grads[i].reserve(net.params[i].size());
    for (const auto& p : net.params[i]) result.grads[i].emplace_back(p.shape());
  }

  // d loss / d scores = w * (softmax(scores) - onehot(target))
  const Scalar mx = result.scores.maxCoeff();
  VectorT<Scalar> probs = (result.scores.array() - mx).exp();
  probs /= probs.sum();
  TensorT<Scalar> grad({net.class_count}, VectorT<Scalar>(weight * probs));
  grad[target] -= weight;

  for (std::size_t ii = net.layers.size(); ii-- > 0;) {
    const LayerSpec& spec = net.layers[ii];
    const BoundLayer& b = net.bound[ii];
    const LayerTraceT<Scalar>& lt = trace.layers[ii];
    const std::string label = detail::layer_label(ii, spec.kind);
    switch (spec.kind) {
      case LayerKind::Dense: {
        const TensorT<Scalar>& w = net.params[ii][0];
        Eigen::Map<const MatrixT<Scalar>> wm(w.data().data(), spec.units, b.dense_in);
        TensorT<Scalar>& dw = result.grads[ii][0];
        Eigen::Map<MatrixT<Scalar>>(dw.data().data(), spec.units, b.dense_in) =
            grad.data() * lt.dense_in.data().transpose();
        result.grads[ii][1].data() = grad.data();
        VectorT<Scalar> dxin = wm.transpose() * grad.data();
        TensorT<Scalar> dx(b.in_shape);
        dx.data() = dxin.head(dx.size());  // metadata gradient is discarded
        grad = std::move(dx);
        break;
      }
      case LayerKind::Conv2d: {
        detail::conv_backward(grad, lt.cols[0], net.params[ii][0], spec.stride, b.pad, b.in_shape,
                              result.grads[ii][0], result.grads[ii][1],
                              ii > 0 ? &grad : nullptr);
        break;
      }
      case LayerKind::ResidualBlock: {
        // y = x + conv2(relu(conv1(x)))
        TensorT<Scalar> dr;
        detail::conv_backward(grad, lt.cols[1], net.params[ii][2], Index{1}, b.pad, b.in_shape,
                              result.grads[ii][2], result.grads[ii][3], &dr);
        TensorT<Scalar> da = detail::relu_backward(dr, lt.pre[0]);
        TensorT<Scalar> dx_f;
        detail::conv_backward(da, lt.cols[0], net.params[ii][0], Index{1}, b.pad, b.in_shape,
                              result.grads[ii][0], result.grads[ii][1], &dx_f);
        grad = grad + dx_f;  // identity path plus F path
        break;
      }
      case LayerKind::DenseBlock: {
        TensorT<Scalar> dcat = grad;
        for (Index l = spec.block_layers; l-- > 0;) {
          const Index cin = b.channels + l * spec.growth;
          TensorT<Scalar> dy = detail::slice_channels(dcat, cin, spec.growth);
          TensorT<Scalar> da = detail::relu_backward(dy, lt.pre[l]);
          std::vector<Index> in_shape = {b.in_shape[0], b.in_shape[1], cin};
          TensorT<Scalar> dprev;
          detail::conv_backward(da, lt.cols[l], net.params[ii][2 * l], Index{1}, b.pad, in_shape,
                                result.grads[ii][2 * l], result.grads[ii][2 * l + 1], &dprev);
          dprev = dprev + detail::slice_channels(dcat, Index{0}, cin);
          dcat = std::move(dprev);
        }
        grad = std::move(dcat);
        break;
      }
      case LayerKind::Dropout: {
        if (train_mode && spec.rate > 0.0) {
          TensorT<Scalar> dx(lt.input.shape());
          dx.data() = grad.data().array() * lt.mask.data().array();
          grad = std::move(dx);
        }
        break;
      }
      case LayerKind::Relu:
        grad = detail::relu_backward(grad, lt.input);
        break;
      case LayerKind::Flatten:
        grad = grad.reshaped(b.in_shape);
        break;
    }
    detail::require_finite(grad, label + " backward");
  }
  return result;
}

}  // namespace hydra

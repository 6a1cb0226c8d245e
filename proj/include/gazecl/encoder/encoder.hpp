#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gazecl/numcore/ops.hpp"
#include "gazecl/numcore/rng.hpp"
#include "gazecl/numcore/tensor.hpp"

namespace gazecl::encoder {

using numcore::BatchNormState;
using numcore::ContractError;
using numcore::i64;
using numcore::NormMode;
using numcore::NumericError;
using numcore::Rng;
using numcore::Tensor;

// Six dilated residual SE blocks on top of a stem convolution, pooled over
// time into a fixed-width representation, plus a two-layer projection head.
struct EncoderConfig {
  std::vector<i64> channel_plan;   // output width per block
  i64 kernel_size = 3;             // odd
  i64 stem_kernel = 7;             // odd
  std::vector<i64> dilation_plan;  // per block
  i64 se_reduction = 16;
  i64 d_h = 512;  // representation width; must equal channel_plan.back()
  i64 d_z = 128;  // projection width
  i64 projection_hidden = 512;

  static EncoderConfig paper_scale() {
    EncoderConfig c;
    c.channel_plan = {64, 64, 128, 128, 256, 512};
    c.dilation_plan = {1, 2, 4, 8, 16, 32};
    c.d_h = 512;
    c.d_z = 128;
    c.projection_hidden = 512;
    return c;
  }

  // Small enough to train on a couple of CPU cores in minutes.
  static EncoderConfig desk_scale() {
    EncoderConfig c;
    c.channel_plan = {8, 8, 16, 16, 32, 32};
    c.dilation_plan = {1, 2, 4, 8, 16, 32};
    c.se_reduction = 4;
    c.d_h = 32;
    c.d_z = 16;
    c.projection_hidden = 32;
    return c;
  }

  void validate() const {
    if (channel_plan.size() != 6 || dilation_plan.size() != 6)
      throw ContractError("encoder: channel_plan and dilation_plan need 6 entries");
    if (kernel_size % 2 == 0 || stem_kernel % 2 == 0)
      throw ContractError("encoder: kernel sizes must be odd");
    if (channel_plan.back() != d_h)
      throw ContractError("encoder: d_h must equal the final channel width");
    for (i64 c : channel_plan)
      if (c < 1) throw ContractError("encoder: channel widths must be positive");
    for (i64 d : dilation_plan)
      if (d < 1) throw ContractError("encoder: dilations must be positive");
    if (se_reduction < 1 || d_z < 1 || projection_hidden < 1)
      throw ContractError("encoder: widths must be positive");
  }

  i64 se_bottleneck(i64 channels) const {
    return std::max<i64>(1, channels / se_reduction);
  }
};

template <typename T>
struct ConvParams {
  Tensor<T> w, b;
};

template <typename T>
struct NormParams {
  Tensor<T> gamma, beta;
  BatchNormState<T> state;
};

template <typename T>
struct BlockParams {
  ConvParams<T> conv1, conv2;
  NormParams<T> bn1, bn2;
  Tensor<T> se_w1, se_b1, se_w2, se_b2;
  bool has_proj = false;
  ConvParams<T> proj;  // 1x1 on the skip path when the width changes
};

template <typename T>
struct EncoderParams {
  EncoderConfig config;
  ConvParams<T> stem;
  NormParams<T> stem_bn;
  std::vector<BlockParams<T>> blocks;
  Tensor<T> head_w1, head_b1, head_w2, head_b2;

  // Learnables in a fixed order shared by the optimizer and checkpoints.
  std::vector<std::pair<std::string, Tensor<T>>> named_parameters() const {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    out.emplace_back("stem.conv.w", stem.w);
    out.emplace_back("stem.conv.b", stem.b);
    out.emplace_back("stem.bn.gamma", stem_bn.gamma);
    out.emplace_back("stem.bn.beta", stem_bn.beta);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = "block" + std::to_string(i) + ".";
      const auto& blk = blocks[i];
      out.emplace_back(p + "conv1.w", blk.conv1.w);
      out.emplace_back(p + "conv1.b", blk.conv1.b);
      out.emplace_back(p + "bn1.gamma", blk.bn1.gamma);
      out.emplace_back(p + "bn1.beta", blk.bn1.beta);
      out.emplace_back(p + "conv2.w", blk.conv2.w);
      out.emplace_back(p + "conv2.b", blk.conv2.b);
      out.emplace_back(p + "bn2.gamma", blk.bn2.gamma);
      out.emplace_back(p + "bn2.beta", blk.bn2.beta);
      out.emplace_back(p + "se.w1", blk.se_w1);
      out.emplace_back(p + "se.b1", blk.se_b1);
      out.emplace_back(p + "se.w2", blk.se_w2);
      out.emplace_back(p + "se.b2", blk.se_b2);
      if (blk.has_proj) {
        out.emplace_back(p + "proj.w", blk.proj.w);
        out.emplace_back(p + "proj.b", blk.proj.b);
      }
    }
    out.emplace_back("head.fc1.w", head_w1);
    out.emplace_back("head.fc1.b", head_b1);
    out.emplace_back("head.fc2.w", head_w2);
    out.emplace_back("head.fc2.b", head_b2);
    return out;
  }

  // Non-learnable running statistics, in checkpoint order.
  std::vector<std::pair<std::string, std::vector<T>*>> named_buffers() {
    std::vector<std::pair<std::string, std::vector<T>*>> out;
    out.emplace_back("stem.bn.running_mean", &stem_bn.state.running_mean);
    out.emplace_back("stem.bn.running_var", &stem_bn.state.running_var);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = "block" + std::to_string(i) + ".";
      out.emplace_back(p + "bn1.running_mean", &blocks[i].bn1.state.running_mean);
      out.emplace_back(p + "bn1.running_var", &blocks[i].bn1.state.running_var);
      out.emplace_back(p + "bn2.running_mean", &blocks[i].bn2.state.running_mean);
      out.emplace_back(p + "bn2.running_var", &blocks[i].bn2.state.running_var);
    }
    return out;
  }

  i64 parameter_count() const {
    i64 n = 0;
    for (const auto& [name, t] : named_parameters()) n += t.size();
    return n;
  }
};

// Exact number of scalar learnables for a config, by arithmetic.
inline i64 param_count(const EncoderConfig& cfg) {
  cfg.validate();
  i64 n = 0;
  i64 cin = 2;
  n += cfg.channel_plan[0] * cin * cfg.stem_kernel + cfg.channel_plan[0];  // stem conv
  n += 2 * cfg.channel_plan[0];                                            // stem bn
  cin = cfg.channel_plan[0];
  for (std::size_t i = 0; i < cfg.channel_plan.size(); ++i) {
    const i64 cout = cfg.channel_plan[i];
    n += cout * cin * cfg.kernel_size + cout;  // conv1
    n += 2 * cout;                             // bn1
    n += cout * cout * cfg.kernel_size + cout; // conv2
    n += 2 * cout;                             // bn2
    const i64 cb = cfg.se_bottleneck(cout);
    n += cb * cout + cb;                       // se squeeze
    n += cout * cb + cout;                     // se excite
    if (cin != cout) n += cout * cin + cout;   // 1x1 skip projection
    cin = cout;
  }
  n += cfg.projection_hidden * cfg.d_h + cfg.projection_hidden;
  n += cfg.d_z * cfg.projection_hidden + cfg.d_z;
  return n;
}

namespace detail {

template <typename T>
Tensor<T> fanin_uniform(numcore::Shape shape, i64 fan_in, Rng& rng) {
  auto t = Tensor<T>::zeros(std::move(shape), true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
ConvParams<T> init_conv(i64 cout, i64 cin, i64 k, Rng& rng) {
  ConvParams<T> p;
  p.w = fanin_uniform<T>({cout, cin, k}, cin * k, rng);
  p.b = Tensor<T>::zeros({cout}, true);
  return p;
}

template <typename T>
NormParams<T> init_norm(i64 c) {
  NormParams<T> p;
  p.gamma = Tensor<T>::full({c}, T(1), true);
  p.beta = Tensor<T>::zeros({c}, true);
  p.state = BatchNormState<T>(c);
  return p;
}

}  // namespace detail

// Fan-in-scaled uniform weights, unit normalization gains, zero biases.
template <typename T>
EncoderParams<T> init_params(const EncoderConfig& cfg, Rng rng) {
  cfg.validate();
  EncoderParams<T> p;
  p.config = cfg;
  p.stem = detail::init_conv<T>(cfg.channel_plan[0], 2, cfg.stem_kernel, rng);
  p.stem_bn = detail::init_norm<T>(cfg.channel_plan[0]);
  i64 cin = cfg.channel_plan[0];
  for (std::size_t i = 0; i < cfg.channel_plan.size(); ++i) {
    const i64 cout = cfg.channel_plan[i];
    BlockParams<T> blk;
    blk.conv1 = detail::init_conv<T>(cout, cin, cfg.kernel_size, rng);
    blk.bn1 = detail::init_norm<T>(cout);
    blk.conv2 = detail::init_conv<T>(cout, cout, cfg.kernel_size, rng);
    blk.bn2 = detail::init_norm<T>(cout);
    const i64 cb = cfg.se_bottleneck(cout);
    blk.se_w1 = detail::fanin_uniform<T>({cb, cout}, cout, rng);
    blk.se_b1 = Tensor<T>::zeros({cb}, true);
    blk.se_w2 = detail::fanin_uniform<T>({cout, cb}, cb, rng);
    blk.se_b2 = Tensor<T>::zeros({cout}, true);
    blk.has_proj = cin != cout;
    if (blk.has_proj) blk.proj = detail::init_conv<T>(cout, cin, 1, rng);
    p.blocks.push_back(std::move(blk));
    cin = cout;
  }
  p.head_w1 = detail::fanin_uniform<T>({cfg.projection_hidden, cfg.d_h},
                                       cfg.d_h, rng);
  p.head_b1 = Tensor<T>::zeros({cfg.projection_hidden}, true);
  p.head_w2 = detail::fanin_uniform<T>({cfg.d_z, cfg.projection_hidden},
                                       cfg.projection_hidden, rng);
  p.head_b2 = Tensor<T>::zeros({cfg.d_z}, true);
  return p;
}

// Channel gate from pooled statistics through a sigmoid bottleneck:
// gated[c,t] = sigmoid(W2 relu(W1 GAP(x) + b1) + b2)[c] * x[c,t]
template <typename T>
Tensor<T> se_gate(const Tensor<T>& features, const Tensor<T>& w1,
                  const Tensor<T>& b1, const Tensor<T>& w2,
                  const Tensor<T>& b2) {
  auto pooled = numcore::global_avg_pool(features);
  auto gate = numcore::sigmoid(
      numcore::linear(numcore::relu(numcore::linear(pooled, w1, b1)), w2, b2));
  return numcore::channel_scale(features, gate);
}

template <typename T>
Tensor<T> se_gate(const Tensor<T>& features, const BlockParams<T>& blk) {
  return se_gate(features, blk.se_w1, blk.se_b1, blk.se_w2, blk.se_b2);
}

// Full forward pass through stem, blocks and GAP: [B,2,T] -> [B,d_h].
template <typename T>
Tensor<T> forward_features(EncoderParams<T>& params, const Tensor<T>& x,
                           NormMode mode) {
  if (x.rank() != 3 || x.dim(1) != 2)
    throw ContractError("encoder: input must be [B,2,T], got " +
                        numcore::shape_str(x.shape()));
  const auto& cfg = params.config;
  auto y = numcore::relu(numcore::batchnorm1d(
      numcore::conv1d_same(x, params.stem.w, params.stem.b, 1),
      params.stem_bn.gamma, params.stem_bn.beta, params.stem_bn.state, mode));
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    auto& blk = params.blocks[i];
    const i64 dil = cfg.dilation_plan[i];
    auto main = numcore::relu(numcore::batchnorm1d(
        numcore::conv1d_same(y, blk.conv1.w, blk.conv1.b, dil), blk.bn1.gamma,
        blk.bn1.beta, blk.bn1.state, mode));
    main = numcore::batchnorm1d(
        numcore::conv1d_same(main, blk.conv2.w, blk.conv2.b, dil),
        blk.bn2.gamma, blk.bn2.beta, blk.bn2.state, mode);
    main = se_gate(main, blk);
    auto skip = blk.has_proj
                    ? numcore::conv1d_same(y, blk.proj.w, blk.proj.b, 1)
                    : y;
    y = numcore::relu(numcore::add(main, skip));
  }
  return numcore::global_avg_pool(y);
}

// Projection head: z = W2 relu(W1 h + b1) + b2. h: [d_h] or [B,d_h].
template <typename T>
Tensor<T> project(const EncoderParams<T>& params, const Tensor<T>& h) {
  return numcore::linear(
      numcore::relu(numcore::linear(h, params.head_w1, params.head_b1)),
      params.head_w2, params.head_b2);
}

// Eval-mode representation of one signal [2,T]; pure and graph-free.
template <typename T>
std::vector<T> encode(EncoderParams<T>& params, const std::vector<T>& signal,
                      i64 length) {
  if (length < 1 || static_cast<i64>(signal.size()) != 2 * length)
    throw ContractError("encode: signal must be [2,T] with T >= 1");
  for (T v : signal)
    if (!std::isfinite(static_cast<double>(v)))
      throw NumericError("encode: input contains non-finite samples");
  numcore::NoGradGuard ng;
  auto x = Tensor<T>::from({1, 2, length}, signal);
  auto h = forward_features(params, x, NormMode::Eval);
  return h.data();
}

}  // namespace gazecl::encoder

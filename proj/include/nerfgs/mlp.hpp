#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/param.hpp"
#include "nerfgs/rng.hpp"

namespace nerfgs {

enum class OutputActivation { none, sigmoid, exp, softplus };

// Fully connected net with ReLU hidden layers. Weights live flattened in one
// ParamBlock as [W0 | b0 | W1 | b1 | ...], W row-major [out, in].
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  OutputActivation output_activation = OutputActivation::none;

  int layer_count() const { return int(hidden_dims.size()) + 1; }

  int layer_in(int l) const { return l == 0 ? input_dim : hidden_dims[l - 1]; }
  int layer_out(int l) const { return l == int(hidden_dims.size()) ? output_dim : hidden_dims[l]; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (int l = 0; l < layer_count(); ++l) n += std::size_t(layer_out(l)) * (layer_in(l) + 1);
    return n;
  }

  std::size_t layer_offset(int layer) const {
    std::size_t off = 0;
    for (int l = 0; l < layer; ++l) off += std::size_t(layer_out(l)) * (layer_in(l) + 1);
    return off;
  }

  void validate(std::size_t weight_count, const std::string& who) const {
    require(input_dim >= 1 && output_dim >= 1, Errc::dimension_mismatch, who + ": dims must be >= 1");
    for (int h : hidden_dims)
      require(h >= 1, Errc::dimension_mismatch, who + ": hidden dim must be >= 1");
    require(weight_count == param_count(), Errc::dimension_mismatch,
            who + ": weight block has " + std::to_string(weight_count) + " params, spec needs " +
                std::to_string(param_count()));
  }
};

// Glorot-uniform weights, zero biases.
inline void mlp_init(const MlpSpec& spec, ParamBlock& block, Rng& rng) {
  spec.validate(block.size(), block.name);
  real* w = block.values.data();
  for (int l = 0; l < spec.layer_count(); ++l) {
    int in = spec.layer_in(l), out = spec.layer_out(l);
    real bound = std::sqrt(real(6) / real(in + out));
    for (int i = 0; i < out * in; ++i) *w++ = rng.uniform(-bound, bound);
    for (int i = 0; i < out; ++i) *w++ = 0;
  }
}

// Scratch reused across calls; preactivations are kept for the backward pass.
struct MlpCache {
  std::vector<std::vector<real>> pre;   // per layer, length layer_out
  std::vector<std::vector<real>> post;  // post[0] = input copy, post[l+1] = activations
};

inline void apply_output_activation(OutputActivation act, const real* pre, real* out, int n) {
  switch (act) {
    case OutputActivation::none:
      for (int i = 0; i < n; ++i) out[i] = pre[i];
      break;
    case OutputActivation::sigmoid:
      for (int i = 0; i < n; ++i) out[i] = sigmoid(pre[i]);
      break;
    case OutputActivation::exp:
      for (int i = 0; i < n; ++i) out[i] = std::exp(pre[i]);
      break;
    case OutputActivation::softplus:
      for (int i = 0; i < n; ++i) out[i] = softplus(pre[i]);
      break;
  }
}

inline void mlp_forward(const MlpSpec& spec, const real* weights, std::size_t weight_count,
                        const real* input, std::size_t input_len, real* output, MlpCache& cache) {
  spec.validate(weight_count, "mlp_forward");
  require(int(input_len) == spec.input_dim, Errc::dimension_mismatch,
          "mlp_forward: input length " + std::to_string(input_len) + " != input_dim " +
              std::to_string(spec.input_dim));
  int layers = spec.layer_count();
  cache.pre.resize(layers);
  cache.post.resize(layers + 1);
  cache.post[0].assign(input, input + input_len);

  const real* w = weights;
  for (int l = 0; l < layers; ++l) {
    int in = spec.layer_in(l), out = spec.layer_out(l);
    const std::vector<real>& x = cache.post[l];
    cache.pre[l].resize(out);
    const real* bias = w + std::size_t(out) * in;
    for (int o = 0; o < out; ++o) {
      const real* row = w + std::size_t(o) * in;
      real s = bias[o];
      for (int i = 0; i < in; ++i) s += row[i] * x[i];
      cache.pre[l][o] = s;
    }
    cache.post[l + 1].resize(out);
    if (l + 1 < layers) {
      for (int o = 0; o < out; ++o) cache.post[l + 1][o] = cache.pre[l][o] > 0 ? cache.pre[l][o] : 0;
    } else {
      apply_output_activation(spec.output_activation, cache.pre[l].data(), cache.post[l + 1].data(), out);
    }
    w += std::size_t(out) * (in + 1);
  }
  for (int o = 0; o < spec.output_dim; ++o) output[o] = cache.post[layers][o];
}

inline void mlp_forward(const MlpSpec& spec, const ParamBlock& weights, const std::vector<real>& input,
                        std::vector<real>& output, MlpCache& cache) {
  output.resize(spec.output_dim);
  mlp_forward(spec, weights.values.data(), weights.size(), input.data(), input.size(), output.data(), cache);
}

// grad_weights accumulates (+=); grad_input is overwritten. The cache must
// come from the matching forward call.
inline void mlp_backward(const MlpSpec& spec, const real* weights, const MlpCache& cache,
                         const real* grad_output, real* grad_weights, real* grad_input) {
  int layers = spec.layer_count();
  std::vector<real> delta(cache.pre[layers - 1].size());

  // Output activation.
  {
    int out = spec.layer_out(layers - 1);
    const auto& pre = cache.pre[layers - 1];
    const auto& post = cache.post[layers];
    for (int o = 0; o < out; ++o) {
      real g = grad_output[o];
      switch (spec.output_activation) {
        case OutputActivation::none: break;
        case OutputActivation::sigmoid: g *= post[o] * (1 - post[o]); break;
        case OutputActivation::exp: g *= post[o]; break;
        case OutputActivation::softplus: g *= softplus_grad(pre[o]); break;
      }
      delta[o] = g;
    }
  }

  for (int l = layers - 1; l >= 0; --l) {
    int in = spec.layer_in(l), out = spec.layer_out(l);
    const std::vector<real>& x = cache.post[l];
    std::size_t off = spec.layer_offset(l);
    real* gw = grad_weights + off;
    real* gb = gw + std::size_t(out) * in;
    for (int o = 0; o < out; ++o) {
      real d = delta[o];
      real* grow = gw + std::size_t(o) * in;
      for (int i = 0; i < in; ++i) grow[i] += d * x[i];
      gb[o] += d;
    }
    std::vector<real> prev(in, 0);
    const real* w = weights + off;
    for (int o = 0; o < out; ++o) {
      real d = delta[o];
      const real* row = w + std::size_t(o) * in;
      for (int i = 0; i < in; ++i) prev[i] += d * row[i];
    }
    if (l > 0) {
      const auto& pre_prev = cache.pre[l - 1];
      for (int i = 0; i < in; ++i) prev[i] = pre_prev[i] > 0 ? prev[i] : 0;
    }
    delta = std::move(prev);
  }
  for (int i = 0; i < spec.input_dim; ++i) grad_input[i] = delta[i];
}

}  // namespace nerfgs

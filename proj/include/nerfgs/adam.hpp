#pragma once

#include <cmath>
#include <string>

#include "nerfgs/common.hpp"
#include "nerfgs/param.hpp"

namespace nerfgs {

struct AdamConfig {
  real lr = real(1e-3);
  real beta1 = real(0.9);
  real beta2 = real(0.999);
  real eps = real(1e-8);

  void validate() const {
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, Errc::usage, "adam: betas must be in [0,1)");
    require(eps > 0, Errc::usage, "adam: eps must be > 0");
    require(lr >= 0, Errc::usage, "adam: lr must be >= 0");
  }
};

// Standard bias-corrected Adam. Grads are zeroed afterward; step_count is
// incremented even when lr == 0 so moment bias correction stays consistent.
inline void adam_step(ParamBlock& block, const AdamConfig& cfg) {
  cfg.validate();
  block.step_count++;
  const real t = real(block.step_count);
  const real bc1 = 1 - std::pow(cfg.beta1, t);
  const real bc2 = 1 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < block.size(); ++i) {
    real g = block.grads[i];
    if (!std::isfinite(g))
      fail(Errc::non_finite, "adam_step: non-finite gradient in block '" + block.name + "' at index " +
                                 std::to_string(i));
    real m = block.adam_m[i] = cfg.beta1 * block.adam_m[i] + (1 - cfg.beta1) * g;
    real v = block.adam_v[i] = cfg.beta2 * block.adam_v[i] + (1 - cfg.beta2) * g * g;
    real update = cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
    block.values[i] -= update;
    if (!std::isfinite(block.values[i]))
      fail(Errc::non_finite, "adam_step: non-finite value in block '" + block.name + "' at index " +
                                 std::to_string(i));
  }
  block.zero_grads();
}

}  // namespace nerfgs

#pragma once

#include <json.hpp>

#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/image.hpp"
#include "nerfgs/metrics.hpp"
#include "nerfgs/param.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

// The lambda coefficients of Eq. 13 (and Eq. 10/11 inner weights).
struct LossWeights {
  real en = real(1e-4);
  real ssim = real(0.2);
  real vol = real(1e-3);
  real nerf = real(0.1);
  real rgb = real(0.05);
  real op = real(1e-3);
  real fea = real(1e-4);
  real pos = real(1e-4);

  void validate() const {
    const real v[8] = {en, ssim, vol, nerf, rgb, op, fea, pos};
    for (real x : v) require(x >= 0 && std::isfinite(x), Errc::usage, "loss weights must be finite and >= 0");
  }
};

struct LossReport {
  int iter = 0;
  real nerf_rgb = 0, nerf_en = 0;
  real gs_rgb = 0, gs_ssim = 0, gs_vol = 0;
  real joint_rgb = 0, joint_op = 0;
  real reg_fea = 0, reg_pos = 0;
  real total = 0;
  std::size_t gaussian_count = 0;
  real heldout_psnr = -1;  // < 0 when not evaluated this iteration

  // Eq. 13 with L_nerf = rgb + lambda_en * en and L_gs = rgb + lambda_ssim *
  // ssim + lambda_vol * vol expanded.
  real weighted_total(const LossWeights& w) const {
    return gs_rgb + w.ssim * gs_ssim + w.vol * gs_vol + w.nerf * (nerf_rgb + w.en * nerf_en) +
           w.rgb * joint_rgb + w.op * joint_op + w.fea * reg_fea + w.pos * reg_pos;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["iter"] = iter;
    j["nerf_rgb"] = nerf_rgb;
    j["nerf_en"] = nerf_en;
    j["gs_rgb"] = gs_rgb;
    j["gs_ssim"] = gs_ssim;
    j["gs_vol"] = gs_vol;
    j["joint_rgb"] = joint_rgb;
    j["joint_op"] = joint_op;
    j["reg_fea"] = reg_fea;
    j["reg_pos"] = reg_pos;
    j["total"] = total;
    j["gaussian_count"] = gaussian_count;
    if (heldout_psnr >= 0) j["heldout_psnr"] = heldout_psnr;
    return j;
  }
};

// Mean absolute error over pixels and channels; grad accumulates
// grad_scale * sign into grad_image.
inline real image_l1(const Image& render, const Image& gt, Image* grad_image, real grad_scale) {
  require(render.width == gt.width && render.height == gt.height, Errc::dimension_mismatch,
          "image_l1: size mismatch");
  const real inv = real(1) / real(render.size() * 3);
  real loss = 0;
  for (std::size_t i = 0; i < render.size(); ++i) {
    Vec3 d = render.pixels[i] - gt.pixels[i];
    for (int c = 0; c < 3; ++c) {
      loss += std::abs(d[c]) * inv;
      if (grad_image && grad_scale != 0)
        grad_image->pixels[i][c] += grad_scale * inv * (d[c] > 0 ? 1 : (d[c] < 0 ? -1 : 0));
    }
  }
  return loss;
}

// 1 - SSIM, with gradient w.r.t. the render.
inline real ssim_loss(const Image& render, const Image& gt, Image* grad_image, real grad_scale) {
  real s = ssim(render, gt);
  if (grad_image && grad_scale != 0) {
    Image g = ssim_backward_wrt_a(render, gt, -grad_scale);
    for (std::size_t i = 0; i < g.size(); ++i) grad_image->pixels[i] += g.pixels[i];
  }
  return 1 - s;
}

// Mean squared residual norm over rows of a [N, dim] block.
inline real residual_l2(const ParamBlock& block, real grad_scale, bool accumulate_grads) {
  const std::size_t n = block.shape.empty() ? 0 : block.shape[0];
  if (n == 0) return 0;
  real loss = 0;
  const real inv = real(1) / real(n);
  for (std::size_t i = 0; i < block.size(); ++i) loss += block.values[i] * block.values[i];
  loss *= inv;
  if (accumulate_grads && grad_scale != 0) {
    ParamBlock& b = const_cast<ParamBlock&>(block);
    for (std::size_t i = 0; i < block.size(); ++i) b.grads[i] += grad_scale * 2 * block.values[i] * inv;
  }
  return loss;
}

}  // namespace nerfgs

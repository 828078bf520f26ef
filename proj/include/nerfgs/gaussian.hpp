#pragma once

#include <vector>

#include "nerfgs/common.hpp"
#include "nerfgs/counters.hpp"
#include "nerfgs/mlp.hpp"
#include "nerfgs/param.hpp"
#include "nerfgs/sh.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

// Decoded per-Gaussian attributes (Eq. 6/7 output head).
struct GaussianAttributes {
  std::vector<real> sh;  // [(deg+1)^2 * 3], raw coefficients
  real opacity = 0;
  Vec4 rot;    // unit quaternion
  Vec3 scale;  // positive, scene units
};

// The Gaussian set: fixed initial positions plus trainable residual blocks
// whose rows track the set (delta_pos [N,3], delta_fea [N,F]).
struct GaussianSet {
  std::vector<Vec3> positions;
  std::vector<int> ids;
  int next_id = 0;
  ParamBlock* delta_pos = nullptr;
  ParamBlock* delta_fea = nullptr;
  // Per-Gaussian trainable feature used instead of the shared hash feature
  // under the no_feature_share ablation; always allocated, zero-sized rows
  // cost nothing.
  std::uint64_t revision = 0;  // bumped on any add/remove; invalidates caches

  std::size_t size() const { return positions.size(); }
  int feature_dim() const { return int(delta_fea->row_dim()); }

  Vec3 delta_position(std::size_t i) const {
    const real* r = delta_pos->values.data() + i * 3;
    return {r[0], r[1], r[2]};
  }

  Vec3 effective_position(std::size_t i) const { return positions[i] + delta_position(i); }

  void append(const Vec3& p) {
    positions.push_back(p);
    ids.push_back(next_id++);
    delta_pos->append_rows(1);
    delta_fea->append_rows(1);
    revision++;
  }

  void keep(const std::vector<char>& mask) {
    require(mask.size() == size(), Errc::dimension_mismatch, "gaussian keep mask size");
    std::size_t out = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      positions[out] = positions[i];
      ids[out] = ids[i];
      ++out;
    }
    positions.resize(out);
    ids.resize(out);
    delta_pos->keep_rows(mask);
    delta_fea->keep_rows(mask);
    revision++;
  }
};

inline GaussianSet make_gaussian_set(ParamRegistry& reg, int feature_dim) {
  GaussianSet set;
  set.delta_pos = &reg.add("gaussian_delta_pos", {0, 3});
  set.delta_fea = &reg.add("gaussian_delta_fea", {0, std::size_t(feature_dim)});
  return set;
}

// Eq. 2: Sigma = R S S^T R^T.
inline Mat3 covariance(const Vec4& rot, const Vec3& scale) {
  Mat3 R = quat_to_rot(rot);
  Mat3 M = R;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) M(i, j) *= scale[j];
  return M * M.transposed();
}

// Backward of covariance: grad_sigma holds dL/dSigma with the off-diagonal
// pairs already symmetrized (G(i,j) == G(j,i)). Accumulates into grad_rot
// (w.r.t. the unit quaternion) and grad_scale.
inline void covariance_backward(const Vec4& rot, const Vec3& scale, const Mat3& grad_sigma, Vec4& grad_rot,
                                Vec3& grad_scale) {
  Mat3 R = quat_to_rot(rot);
  Mat3 M = R;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) M(i, j) *= scale[j];
  // dL/dM = (G + G^T) M = 2 G M for symmetric G.
  Mat3 GM;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      real s = 0;
      for (int k = 0; k < 3; ++k) s += (grad_sigma(i, k) + grad_sigma(k, i)) * M(k, j);
      GM(i, j) = s;
    }
  Mat3 GR;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      GR(i, j) = GM(i, j) * scale[j];
      grad_scale[j] += GM(i, j) * R(i, j);
    }
  // dR/dq of quat_to_rot, unit quaternion q = (w,x,y,z).
  const real w = rot.w, x = rot.x, y = rot.y, z = rot.z;
  const Mat3 dRw{{0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0}};
  const Mat3 dRx{{0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x}};
  const Mat3 dRy{{-4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y}};
  const Mat3 dRz{{-4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0}};
  const Mat3* dR[4] = {&dRw, &dRx, &dRy, &dRz};
  for (int q = 0; q < 4; ++q) {
    real s = 0;
    for (int i = 0; i < 9; ++i) s += GR.m[i] * dR[q]->m[i];
    grad_rot[q] += s;
  }
}

// Raw F_gs head layout: [sh | opacity | quaternion | scale].
struct GsHeadLayout {
  int sh_degree = 1;
  int sh_count() const { return sh_coeff_count(sh_degree) * 3; }
  int raw_dim() const { return sh_count() + 1 + 4 + 3; }
  int opacity_at() const { return sh_count(); }
  int quat_at() const { return sh_count() + 1; }
  int scale_at() const { return sh_count() + 5; }
};

inline MlpSpec make_gs_spec(int feature_dim, const std::vector<int>& hidden, const GsHeadLayout& head) {
  MlpSpec s;
  s.input_dim = 3 + feature_dim;
  s.hidden_dims = hidden;
  s.output_dim = head.raw_dim();
  s.output_activation = OutputActivation::none;
  return s;
}

struct DecodeCtx {
  MlpCache cache;
  std::vector<real> input;
  std::vector<real> raw;
  GaussianAttributes attrs;
  real quat_norm = 0;
  bool quat_guarded = false;
  bool scale_clamped[3] = {false, false, false};
};

// Eq. 7: A = F_gs(p + dp, f + df), heads activated as
//   opacity = sigmoid, rot = normalized quaternion (zero guarded to
//   identity), scale = exp clamped to [1e-4, scale_max], SH raw.
// log_scale_bias shifts the scale head pre-activation (split bookkeeping).
inline void decode_attributes_cached(const MlpSpec& spec, const GsHeadLayout& head, const ParamBlock& weights,
                                     const Vec3& p, const Vec3& dp, const real* f, const real* df,
                                     real scale_max, DecodeCtx& ctx, real log_scale_bias = 0) {
  counters::gs_decoder_calls()++;
  const int F = spec.input_dim - 3;
  ctx.input.resize(spec.input_dim);
  Vec3 pe = p + dp;
  ctx.input[0] = pe.x;
  ctx.input[1] = pe.y;
  ctx.input[2] = pe.z;
  for (int i = 0; i < F; ++i) ctx.input[3 + i] = f[i] + df[i];
  ctx.raw.resize(spec.output_dim);
  mlp_forward(spec, weights.values.data(), weights.size(), ctx.input.data(), ctx.input.size(), ctx.raw.data(),
              ctx.cache);

  GaussianAttributes& a = ctx.attrs;
  a.sh.assign(ctx.raw.begin(), ctx.raw.begin() + head.sh_count());
  a.opacity = sigmoid(ctx.raw[head.opacity_at()]);
  Vec4 q{ctx.raw[head.quat_at()], ctx.raw[head.quat_at() + 1], ctx.raw[head.quat_at() + 2],
         ctx.raw[head.quat_at() + 3]};
  ctx.quat_norm = q.norm();
  if (ctx.quat_norm < real(1e-12)) {
    a.rot = {};
    a.rot.w = 1;
    ctx.quat_guarded = true;
  } else {
    for (int i = 0; i < 4; ++i) a.rot[i] = q[i] / ctx.quat_norm;
    ctx.quat_guarded = false;
  }
  for (int i = 0; i < 3; ++i) {
    real s = std::exp(ctx.raw[head.scale_at() + i] + log_scale_bias);
    ctx.scale_clamped[i] = s < real(1e-4) || s > scale_max;
    a.scale[i] = clamp(s, real(1e-4), scale_max);
  }
}

inline GaussianAttributes decode_attributes(const MlpSpec& spec, const GsHeadLayout& head,
                                            const ParamBlock& weights, const Vec3& p, const Vec3& dp,
                                            const real* f, const real* df, real scale_max) {
  DecodeCtx ctx;
  decode_attributes_cached(spec, head, weights, p, dp, f, df, scale_max, ctx);
  return ctx.attrs;
}

struct AttributeGrads {
  std::vector<real> sh;  // sized like attrs.sh
  real opacity = 0;
  Vec4 rot;    // w.r.t. unit quaternion
  Vec3 scale;  // w.r.t. activated scale
};

// Chains attribute grads through the head activations and the MLP.
// grad_weights accumulates; grad_dp / grad_feature are overwritten
// (grad_feature is d/d(f + df), length F).
inline void decode_attributes_backward(const MlpSpec& spec, const GsHeadLayout& head,
                                       const ParamBlock& weights, const DecodeCtx& ctx,
                                       const AttributeGrads& g, real* grad_weights, Vec3& grad_dp,
                                       real* grad_feature) {
  std::vector<real> graw(spec.output_dim, 0);
  for (int i = 0; i < head.sh_count(); ++i) graw[i] = g.sh[i];
  {
    real a = ctx.attrs.opacity;
    graw[head.opacity_at()] = g.opacity * a * (1 - a);
  }
  if (!ctx.quat_guarded) {
    // r = q/|q|: dL/dq = (g - r (r.g)) / |q|
    const Vec4& r = ctx.attrs.rot;
    real rg = r.w * g.rot.w + r.x * g.rot.x + r.y * g.rot.y + r.z * g.rot.z;
    for (int i = 0; i < 4; ++i) graw[head.quat_at() + i] = (g.rot[i] - r[i] * rg) / ctx.quat_norm;
  }
  for (int i = 0; i < 3; ++i)
    graw[head.scale_at() + i] = ctx.scale_clamped[i] ? real(0) : g.scale[i] * ctx.attrs.scale[i];

  std::vector<real> gin(spec.input_dim);
  mlp_backward(spec, weights.values.data(), ctx.cache, graw.data(), grad_weights, gin.data());
  grad_dp = {gin[0], gin[1], gin[2]};
  for (int i = 0; i < spec.input_dim - 3; ++i) grad_feature[i] = gin[3 + i];
}

}  // namespace nerfgs

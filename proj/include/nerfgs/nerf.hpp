#pragma once

#include <vector>

#include "nerfgs/camera.hpp"
#include "nerfgs/common.hpp"
#include "nerfgs/counters.hpp"
#include "nerfgs/hash_grid.hpp"
#include "nerfgs/mlp.hpp"
#include "nerfgs/rng.hpp"
#include "nerfgs/sh.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit
  real near = 0, far = 1;

  void validate() const {
    require(std::abs(dir.norm() - 1) <= real(1e-9), Errc::usage, "ray: direction must be unit length");
    require(near < far, Errc::usage, "ray: near must be < far");
  }
};

enum class SampleMode { uniform, stratified };

struct RaySampleSet {
  std::vector<real> ts;      // strictly increasing in [near, far]
  std::vector<real> deltas;  // deltas[i] = ts[i+1]-ts[i], last = far-ts.back()
  std::vector<Vec3> xs;
};

// uniform: bin midpoints; stratified: one uniform draw per equal bin.
inline RaySampleSet sample_ray(const Ray& ray, int n, Rng& rng, SampleMode mode) {
  require(n >= 1, Errc::usage, "sample_ray: n must be >= 1");
  RaySampleSet s;
  s.ts.resize(n);
  s.deltas.resize(n);
  s.xs.resize(n);
  const real span = (ray.far - ray.near) / real(n);
  for (int i = 0; i < n; ++i) {
    real u = (mode == SampleMode::stratified) ? rng.uniform() : real(0.5);
    s.ts[i] = ray.near + span * (real(i) + u);
  }
  for (int i = 0; i < n; ++i) {
    s.deltas[i] = (i + 1 < n ? s.ts[i + 1] : ray.far) - s.ts[i];
    s.xs[i] = ray.origin + ray.dir * s.ts[i];
  }
  return s;
}

// Eq. 9 opacity of one sample.
inline real point_opacity(real sigma, real delta) { return real(1) - std::exp(-sigma * delta); }

struct NerfOutputs {
  Vec3 color;
  std::vector<real> weights;
  std::vector<real> alphas;
  std::vector<real> transmittances;  // T_i before sample i; T_0 = 1
  real final_transmittance = 1;
  real median_depth = 0;
  real accumulated_opacity = 0;
  std::vector<real> ts;
  real far = 0;
};

// Shared quadrature core of Eq. 1: front-to-back compositing over
// per-sample (sigma, color, delta), background under residual transmittance.
inline void render_samples(const real* sigmas, const Vec3* colors, const real* deltas, int n,
                           const Vec3& background, NerfOutputs& out) {
  out.alphas.resize(n);
  out.weights.resize(n);
  out.transmittances.resize(n);
  Vec3 c{0, 0, 0};
  real T = 1;
  for (int i = 0; i < n; ++i) {
    out.transmittances[i] = T;
    real a = point_opacity(sigmas[i], deltas[i]);
    out.alphas[i] = a;
    real w = T * a;
    out.weights[i] = w;
    c += colors[i] * w;
    T *= (1 - a);
  }
  out.final_transmittance = T;
  out.accumulated_opacity = 1 - T;
  out.color = c + background * T;
}

// Smallest t_i where the cumulative weight reaches half the total; `far` for
// fully transparent rays.
inline real median_depth(const NerfOutputs& out) {
  real total = 0;
  for (real w : out.weights) total += w;
  if (total <= 0) return out.far;
  const real half = total / 2;
  real cum = 0;
  for (std::size_t i = 0; i < out.weights.size(); ++i) {
    cum += out.weights[i];
    if (cum >= half) return out.ts[i];
  }
  return out.ts.back();
}

// Entropy of the normalized alpha distribution; masked to 0 when the ray is
// nearly empty (InfoNeRF convention).
inline real ray_entropy(const std::vector<real>& alphas, real mask_threshold = real(1e-3)) {
  real s = 0;
  for (real a : alphas) s += a;
  if (s < mask_threshold) return 0;
  real h = 0;
  for (real a : alphas) {
    if (a <= 0) continue;
    real p = a / s;
    h -= p * std::log(p);
  }
  return h < 0 ? 0 : h;
}

// d ray_entropy / d alphas; pairs with ray_entropy.
inline void ray_entropy_backward(const std::vector<real>& alphas, real grad_h, std::vector<real>& grad_alphas,
                                 real mask_threshold = real(1e-3)) {
  grad_alphas.assign(alphas.size(), 0);
  real s = 0;
  for (real a : alphas) s += a;
  if (s < mask_threshold) return;
  real h = 0;
  for (real a : alphas) {
    if (a <= 0) continue;
    real p = a / s;
    h -= p * std::log(p);
  }
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (alphas[i] <= 0) continue;
    real p = alphas[i] / s;
    grad_alphas[i] = grad_h * (-(h + std::log(p)) / s);
  }
}

// The NeRF branch: shared hash features decoded to density and color.
//   sigma = softplus(F_sigma(f)), color = sigmoid(F_c(f, sh_embed(d)))
struct NerfField {
  const HashGridConfig* grid_cfg = nullptr;
  HashGridParams grid;
  MlpSpec sigma_spec;
  MlpSpec color_spec;
  ParamBlock* sigma_weights = nullptr;
  ParamBlock* color_weights = nullptr;
  Vec3 background{0, 0, 0};

  static constexpr int kDirEmbedDim = 16;  // SH bands 0..3

  int feature_dim() const { return grid_cfg->feature_dim(); }

  static MlpSpec make_sigma_spec(int feature_dim, const std::vector<int>& hidden) {
    MlpSpec s;
    s.input_dim = feature_dim;
    s.hidden_dims = hidden;
    s.output_dim = 1;
    s.output_activation = OutputActivation::softplus;
    return s;
  }

  static MlpSpec make_color_spec(int feature_dim, const std::vector<int>& hidden) {
    MlpSpec s;
    s.input_dim = feature_dim + kDirEmbedDim;
    s.hidden_dims = hidden;
    s.output_dim = 3;
    s.output_activation = OutputActivation::sigmoid;
    return s;
  }
};

inline void dir_embedding(const Vec3& d, real* out16) { sh_basis(3, d, out16); }

// Reusable per-worker scratch holding one ray's cached forward state.
struct NerfRayWorkspace {
  RaySampleSet samples;
  NerfOutputs out;
  std::vector<real> features;  // n * F
  std::vector<real> sigmas;
  std::vector<Vec3> colors;
  std::vector<std::vector<LevelStencil>> stencils;  // n x levels
  std::vector<MlpCache> sigma_caches;
  std::vector<MlpCache> color_caches;
  std::vector<real> embed;
  std::vector<real> scratch_in;
  std::vector<real> scratch_out;
};

inline void query_point_cached(const NerfField& field, const Vec3& x, const real* embed16, real& sigma,
                               Vec3& color, real* feature, MlpCache& sigma_cache, MlpCache& color_cache,
                               std::vector<real>& scratch_in) {
  counters::nerf_decoder_calls()++;
  encode(field.grid, *field.grid_cfg, x, feature);
  const int F = field.feature_dim();
  real sig_out[1];
  mlp_forward(field.sigma_spec, field.sigma_weights->values.data(), field.sigma_weights->size(), feature,
              std::size_t(F), sig_out, sigma_cache);
  sigma = sig_out[0];
  scratch_in.resize(std::size_t(F) + NerfField::kDirEmbedDim);
  for (int i = 0; i < F; ++i) scratch_in[i] = feature[i];
  for (int i = 0; i < NerfField::kDirEmbedDim; ++i) scratch_in[F + i] = embed16[i];
  real col_out[3];
  mlp_forward(field.color_spec, field.color_weights->values.data(), field.color_weights->size(),
              scratch_in.data(), scratch_in.size(), col_out, color_cache);
  color = {col_out[0], col_out[1], col_out[2]};
}

// (sigma, color, feature) at a point for view direction d.
inline void query_point(const NerfField& field, const Vec3& x, const Vec3& d, real& sigma, Vec3& color,
                        std::vector<real>& feature) {
  real embed[NerfField::kDirEmbedDim];
  dir_embedding(d, embed);
  feature.resize(field.feature_dim());
  MlpCache c1, c2;
  std::vector<real> scratch;
  query_point_cached(field, x, embed, sigma, color, feature.data(), c1, c2, scratch);
}

// Volume-renders one ray, retaining everything the backward pass needs.
inline void render_ray_cached(const NerfField& field, const Ray& ray, int n, Rng& rng, SampleMode mode,
                              NerfRayWorkspace& ws) {
  ray.validate();
  ws.samples = sample_ray(ray, n, rng, mode);
  const int F = field.feature_dim();
  ws.features.resize(std::size_t(n) * F);
  ws.sigmas.resize(n);
  ws.colors.resize(n);
  if (int(ws.sigma_caches.size()) < n) ws.sigma_caches.resize(n);
  if (int(ws.color_caches.size()) < n) ws.color_caches.resize(n);
  ws.embed.resize(NerfField::kDirEmbedDim);
  dir_embedding(ray.dir, ws.embed.data());
  if (int(ws.stencils.size()) < n) ws.stencils.resize(n);
  for (int i = 0; i < n; ++i) {
    counters::nerf_decoder_calls()++;
    counters::hash_encode_calls()++;
    real* feature = ws.features.data() + std::size_t(i) * F;
    ws.stencils[i] = compute_stencils(*field.grid_cfg, ws.samples.xs[i]);
    encode_from_stencils(field.grid, *field.grid_cfg, ws.stencils[i], feature);
    real sig_out[1];
    mlp_forward(field.sigma_spec, field.sigma_weights->values.data(), field.sigma_weights->size(), feature,
                std::size_t(F), sig_out, ws.sigma_caches[i]);
    ws.sigmas[i] = sig_out[0];
    ws.scratch_in.resize(std::size_t(F) + NerfField::kDirEmbedDim);
    for (int k = 0; k < F; ++k) ws.scratch_in[k] = feature[k];
    for (int k = 0; k < NerfField::kDirEmbedDim; ++k) ws.scratch_in[F + k] = ws.embed[k];
    real col_out[3];
    mlp_forward(field.color_spec, field.color_weights->values.data(), field.color_weights->size(),
                ws.scratch_in.data(), ws.scratch_in.size(), col_out, ws.color_caches[i]);
    ws.colors[i] = {col_out[0], col_out[1], col_out[2]};
  }
  render_samples(ws.sigmas.data(), ws.colors.data(), ws.samples.deltas.data(), n, field.background, ws.out);
  ws.out.ts = ws.samples.ts;
  ws.out.far = ray.far;
  ws.out.median_depth = median_depth(ws.out);
}

inline NerfOutputs render_ray(const NerfField& field, const Ray& ray, int n, Rng& rng,
                              SampleMode mode = SampleMode::stratified) {
  NerfRayWorkspace ws;
  render_ray_cached(field, ray, n, rng, mode, ws);
  return ws.out;
}

// Gradient sinks for one worker: dense buffers matching the field's blocks.
struct NerfGradSinks {
  real* sigma_w = nullptr;
  real* color_w = nullptr;
  std::vector<real*> tables;
};

// Backpropagates d(loss)/d(ray color) plus optional direct per-sample alpha
// gradients (entropy, opacity alignment) through the blend, the decoders and
// the hash tables. Uses the cached state in ws.
inline void nerf_ray_backward(const NerfField& field, NerfRayWorkspace& ws, const Vec3& grad_color,
                              const std::vector<real>* grad_alphas_extra, NerfGradSinks& sinks) {
  const int n = int(ws.sigmas.size());
  const int F = field.feature_dim();
  const auto& alphas = ws.out.alphas;
  const auto& Ts = ws.out.transmittances;

  // Suffix recurrences: Q_i = sum_{j>i} alpha_j c_j prod_{i<k<j}(1-alpha_k),
  // R_i = prod_{i<k<=N}(1-alpha_k); then dC/dalpha_i = T_i (c_i - Q_i - R_i bg).
  Vec3 Q{0, 0, 0};
  real R = 1;
  std::vector<real>& grad_sig = ws.scratch_out;
  grad_sig.resize(n);
  std::vector<real> grad_alpha(n);
  for (int i = n - 1; i >= 0; --i) {
    Vec3 dCda = (ws.colors[i] - Q - field.background * R) * Ts[i];
    real ga = dCda.dot(grad_color);
    if (grad_alphas_extra) ga += (*grad_alphas_extra)[i];
    grad_alpha[i] = ga;
    Q = ws.colors[i] * alphas[i] + Q * (1 - alphas[i]);
    R *= (1 - alphas[i]);
    grad_sig[i] = ga * ws.samples.deltas[i] * std::exp(-ws.sigmas[i] * ws.samples.deltas[i]);
  }

  std::vector<real> gfeat(F);
  std::vector<real> gin(std::size_t(F) + NerfField::kDirEmbedDim);
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < F; ++f) gfeat[f] = 0;
    // Color path: dC/dc_i = w_i.
    Vec3 gcol = grad_color * ws.out.weights[i];
    real gcol3[3] = {gcol.x, gcol.y, gcol.z};
    bool color_active = gcol.x != 0 || gcol.y != 0 || gcol.z != 0;
    if (color_active) {
      mlp_backward(field.color_spec, field.color_weights->values.data(), ws.color_caches[i], gcol3,
                   sinks.color_w, gin.data());
      for (int f = 0; f < F; ++f) gfeat[f] += gin[f];
    }
    // Density path.
    if (grad_sig[i] != 0) {
      real gs[1] = {grad_sig[i]};
      mlp_backward(field.sigma_spec, field.sigma_weights->values.data(), ws.sigma_caches[i], gs, sinks.sigma_w,
                   gin.data());
      for (int f = 0; f < F; ++f) gfeat[f] += gin[f];
    }
    if (color_active || grad_sig[i] != 0)
      scatter_grad_from_stencils(*field.grid_cfg, ws.stencils[i], gfeat.data(), sinks.tables);
  }
}

}  // namespace nerfgs

#pragma once

#include <vector>

#include "nerfgs/camera.hpp"
#include "nerfgs/common.hpp"
#include "nerfgs/gaussian.hpp"
#include "nerfgs/hash_grid.hpp"
#include "nerfgs/nerf.hpp"
#include "nerfgs/param.hpp"
#include "nerfgs/project.hpp"
#include "nerfgs/rasterize.hpp"
#include "nerfgs/threading.hpp"

namespace nerfgs {

struct ModelSpec {
  HashGridConfig grid;
  std::vector<int> sigma_hidden{32};
  std::vector<int> color_hidden{32};
  std::vector<int> gs_hidden{64};
  int sh_degree = 1;
  Vec3 background{0, 0, 0};
  bool feature_share = true;
};

// Both branches plus the shared parameter registry. Raw block pointers stay
// valid for the model's lifetime (registry owns them behind unique_ptr).
struct Model {
  ModelSpec spec;
  ParamRegistry registry;

  NerfField nerf;
  MlpSpec gs_spec;
  GsHeadLayout gs_head;
  ParamBlock* gs_weights = nullptr;
  GaussianSet gaussians;
  std::vector<real> scale_offsets;  // per-Gaussian log-scale bias (split /1.6)

  int sigma_w_id = -1, color_w_id = -1, gs_w_id = -1;
  std::vector<int> table_ids;

  real scale_max = 1;

  // Per-Gaussian hash stencils; valid while stencil_revision matches.
  std::vector<std::vector<LevelStencil>> stencil_cache;
  std::uint64_t stencil_revision = ~std::uint64_t(0);

  // Baked attributes for hash-free / decoder-free GS inference.
  std::vector<GaussianAttributes> baked;
  bool has_baked = false;

  int feature_dim() const { return spec.grid.feature_dim(); }

  void append_gaussian(const Vec3& p) {
    gaussians.append(p);
    scale_offsets.push_back(0);
  }

  void keep_gaussians(const std::vector<char>& mask) {
    gaussians.keep(mask);
    std::size_t out = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) scale_offsets[out++] = scale_offsets[i];
    scale_offsets.resize(out);
  }
};

inline Model make_model(const ModelSpec& spec, std::uint64_t seed) {
  Model m;
  m.spec = spec;
  m.scale_max = spec.grid.bounds.diag() / 2;

  Rng table_rng = Rng::split(seed, 1);
  m.nerf.grid = make_hash_grid(spec.grid, m.registry, table_rng);
  m.nerf.grid_cfg = &m.spec.grid;
  m.nerf.background = spec.background;

  const int F = spec.grid.feature_dim();
  m.nerf.sigma_spec = NerfField::make_sigma_spec(F, spec.sigma_hidden);
  m.nerf.color_spec = NerfField::make_color_spec(F, spec.color_hidden);
  m.nerf.sigma_weights = &m.registry.add("nerf_sigma_mlp", {m.nerf.sigma_spec.param_count()});
  m.nerf.color_weights = &m.registry.add("nerf_color_mlp", {m.nerf.color_spec.param_count()});
  Rng r2 = Rng::split(seed, 2);
  mlp_init(m.nerf.sigma_spec, *m.nerf.sigma_weights, r2);
  Rng r3 = Rng::split(seed, 3);
  mlp_init(m.nerf.color_spec, *m.nerf.color_weights, r3);

  m.gs_head.sh_degree = spec.sh_degree;
  m.gs_spec = make_gs_spec(F, spec.gs_hidden, m.gs_head);
  m.gs_weights = &m.registry.add("gs_mlp", {m.gs_spec.param_count()});
  Rng r4 = Rng::split(seed, 4);
  mlp_init(m.gs_spec, *m.gs_weights, r4);

  m.gaussians = make_gaussian_set(m.registry, F);

  for (int l = 0; l < spec.grid.levels; ++l) m.table_ids.push_back(l);
  m.sigma_w_id = m.registry.index_of(*m.nerf.sigma_weights);
  m.color_w_id = m.registry.index_of(*m.nerf.color_weights);
  m.gs_w_id = m.registry.index_of(*m.gs_weights);
  return m;
}

// Deep copy via rebuild: exact (double) parameter copy, unlike a checkpoint
// round-trip which truncates to f32.
inline Model clone_model(const Model& src, std::uint64_t seed) {
  Model m = make_model(src.spec, seed);
  const std::size_t n = src.gaussians.size();
  m.gaussians.delta_pos->append_rows(n);
  m.gaussians.delta_fea->append_rows(n);
  for (std::size_t b = 0; b < src.registry.count(); ++b) {
    const ParamBlock& from = src.registry.block(b);
    ParamBlock& to = m.registry.block(b);
    require(from.name == to.name && from.shape == to.shape, Errc::dimension_mismatch, "clone_model layout");
    to.values = from.values;
    to.grads = from.grads;
    to.adam_m = from.adam_m;
    to.adam_v = from.adam_v;
    to.step_count = from.step_count;
  }
  m.gaussians.positions = src.gaussians.positions;
  m.gaussians.ids = src.gaussians.ids;
  m.gaussians.next_id = src.gaussians.next_id;
  m.gaussians.revision = src.gaussians.revision + 1;
  m.scale_offsets = src.scale_offsets;
  m.baked = src.baked;
  m.has_baked = src.has_baked;
  return m;
}

inline void refresh_stencil_cache(Model& m) {
  if (!m.spec.feature_share) return;
  if (m.stencil_revision == m.gaussians.revision) return;
  m.stencil_cache.resize(m.gaussians.size());
  for (std::size_t i = 0; i < m.gaussians.size(); ++i)
    m.stencil_cache[i] = compute_stencils(m.spec.grid, m.gaussians.positions[i]);
  m.stencil_revision = m.gaussians.revision;
}

// One GS-branch forward pass against a camera, holding everything the
// backward pass needs.
struct GsForward {
  std::vector<real> features;    // N x F (hash features at initial p; zeros without sharing)
  std::vector<DecodeCtx> ctxs;   // N
  std::vector<Splat2D> splats;   // visible subset, input order
  std::vector<ProjectCtx> pctxs;
  std::vector<int> splat_gauss;  // splat -> gaussian index
  std::vector<int> gauss_splat;  // gaussian index -> splat or -1
  RasterRecords records;
  Image image;
  const Camera* camera = nullptr;
};

inline void gs_decode_all(Model& m, GsForward& fwd, ThreadPool* pool = nullptr) {
  refresh_stencil_cache(m);
  const std::size_t N = m.gaussians.size();
  const int F = m.feature_dim();
  fwd.features.assign(N * std::size_t(F), 0);
  fwd.ctxs.resize(N);
  auto body = [&](int, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      real* f = fwd.features.data() + i * F;
      if (m.spec.feature_share) {
        counters::hash_encode_calls()++;
        encode_from_stencils(m.nerf.grid, m.spec.grid, m.stencil_cache[i], f);
      }
      decode_attributes_cached(m.gs_spec, m.gs_head, *m.gs_weights, m.gaussians.positions[i],
                               m.gaussians.delta_position(i), f, m.gaussians.delta_fea->values.data() + i * F,
                               m.scale_max, fwd.ctxs[i], m.scale_offsets[i]);
    }
  };
  if (pool)
    pool->parallel_for(N, body);
  else
    body(0, 0, N);
}

inline void gs_project_all(const Model& m, const Camera& cam, GsForward& fwd) {
  const std::size_t N = m.gaussians.size();
  fwd.splats.clear();
  fwd.pctxs.clear();
  fwd.splat_gauss.clear();
  fwd.gauss_splat.assign(N, -1);
  for (std::size_t i = 0; i < N; ++i) {
    Splat2D s;
    ProjectCtx ctx;
    if (!project_gaussian(m.gaussians.effective_position(i), fwd.ctxs[i].attrs, m.gs_head.sh_degree, cam, s,
                          &ctx))
      continue;
    s.source = m.gaussians.ids[i];
    fwd.gauss_splat[i] = int(fwd.splats.size());
    fwd.splats.push_back(s);
    fwd.pctxs.push_back(ctx);
    fwd.splat_gauss.push_back(int(i));
  }
}

inline Image& gs_render(Model& m, const Camera& cam, GsForward& fwd, const RasterizeOptions& opt = {},
                        ThreadPool* pool = nullptr) {
  gs_decode_all(m, fwd, pool);
  gs_project_all(m, cam, fwd);
  fwd.image = rasterize(fwd.splats, cam, m.spec.background, fwd.records, opt, pool);
  fwd.camera = &cam;
  return fwd.image;
}

// Additional attribute gradients injected by loss terms that bypass the
// rasterizer (opacity alignment, volume regularizer).
struct GaussExtraGrads {
  std::vector<real> opacity;
  std::vector<Vec3> scale;

  void resize(std::size_t n) {
    opacity.assign(n, 0);
    scale.assign(n, Vec3{0, 0, 0});
  }
};

// Backward of the full GS chain: image -> rasterize -> projection ->
// attribute decode -> (F_gs weights, delta_p, delta_f, hash tables).
// Residual-row gradients go straight into the delta blocks (each row is
// owned by exactly one worker chunk); shared-block gradients go through bufs.
inline void gs_render_backward(Model& m, GsForward& fwd, const Image& grad_image,
                               const GaussExtraGrads* extra, GradBuffers& bufs, ThreadPool* pool = nullptr,
                               std::vector<SplatGrad>* out_sgrads = nullptr) {
  std::vector<SplatGrad> local_sgrads;
  std::vector<SplatGrad>& sgrads = out_sgrads ? *out_sgrads : local_sgrads;
  rasterize_backward(fwd.splats, fwd.records, grad_image, m.spec.background, sgrads, pool);

  const std::size_t N = m.gaussians.size();
  const int F = m.feature_dim();
  const Camera& cam = *fwd.camera;

  auto body = [&](int w, std::size_t begin, std::size_t end) {
    std::vector<real> gfeat(F);
    AttributeGrads ag;
    ag.sh.resize(m.gs_head.sh_count());
    real* gw = bufs.at(w, std::size_t(m.gs_w_id)).data();
    std::vector<real*> tables(m.table_ids.size());
    for (std::size_t l = 0; l < m.table_ids.size(); ++l)
      tables[l] = bufs.at(w, std::size_t(m.table_ids[l])).data();

    for (std::size_t i = begin; i < end; ++i) {
      std::fill(ag.sh.begin(), ag.sh.end(), real(0));
      ag.opacity = 0;
      ag.rot = {};
      ag.scale = {0, 0, 0};
      Vec3 g_p_eff{0, 0, 0};
      bool any = false;

      int si = fwd.gauss_splat[i];
      if (si >= 0) {
        const SplatGrad& sg = sgrads[si];
        bool nonzero = sg.opacity != 0 || sg.mean2d.x != 0 || sg.mean2d.y != 0 || sg.color.x != 0 ||
                       sg.color.y != 0 || sg.color.z != 0 || sg.cov2d.xx != 0 || sg.cov2d.xy != 0 ||
                       sg.cov2d.yy != 0;
        if (nonzero) {
          project_backward(m.gaussians.effective_position(i), fwd.ctxs[i].attrs, m.gs_head.sh_degree, cam,
                           fwd.pctxs[si], sg.mean2d, sg.cov2d, sg.color, g_p_eff, ag.rot, ag.scale,
                           ag.sh.data());
          ag.opacity += sg.opacity;
          any = true;
        }
      }
      if (extra) {
        if (extra->opacity[i] != 0) {
          ag.opacity += extra->opacity[i];
          any = true;
        }
        const Vec3& es = extra->scale[i];
        if (es.x != 0 || es.y != 0 || es.z != 0) {
          ag.scale += es;
          any = true;
        }
      }
      if (!any) continue;

      Vec3 g_dp{0, 0, 0};
      decode_attributes_backward(m.gs_spec, m.gs_head, *m.gs_weights, fwd.ctxs[i], ag, gw, g_dp,
                                 gfeat.data());
      g_dp += g_p_eff;  // p_eff = p + delta_p feeds the projection directly

      real* dprow = m.gaussians.delta_pos->grads.data() + i * 3;
      dprow[0] += g_dp.x;
      dprow[1] += g_dp.y;
      dprow[2] += g_dp.z;
      real* dfrow = m.gaussians.delta_fea->grads.data() + i * F;
      for (int k = 0; k < F; ++k) dfrow[k] += gfeat[k];
      if (m.spec.feature_share)
        scatter_grad_from_stencils(m.spec.grid, m.stencil_cache[i], gfeat.data(), tables);
    }
  };
  if (pool)
    pool->parallel_for(N, body);
  else
    body(0, 0, N);
}

// ---- baked inference path (branch separability) ----

inline void bake_attributes(Model& m, ThreadPool* pool = nullptr) {
  GsForward fwd;
  gs_decode_all(m, fwd, pool);
  m.baked.resize(m.gaussians.size());
  for (std::size_t i = 0; i < m.gaussians.size(); ++i) m.baked[i] = std::move(fwd.ctxs[i].attrs);
  m.has_baked = true;
}

// Renders the GS branch from baked attributes: no hash queries, no decoder
// evaluations (verified by the instrumentation counters).
inline Image render_gs_baked(const Model& m, const Camera& cam, const RasterizeOptions& opt = {},
                             ThreadPool* pool = nullptr) {
  require(m.has_baked, Errc::usage, "render_gs_baked: attributes not baked");
  std::vector<Splat2D> splats;
  for (std::size_t i = 0; i < m.gaussians.size(); ++i) {
    Splat2D s;
    if (!project_gaussian(m.gaussians.effective_position(i), m.baked[i], m.gs_head.sh_degree, cam, s))
      continue;
    s.source = m.gaussians.ids[i];
    splats.push_back(s);
  }
  RasterRecords rec;
  return rasterize(splats, cam, m.spec.background, rec, opt, pool);
}

}  // namespace nerfgs
